#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace smcs {

/// Base class for all failures raised by the library. The CLI maps
/// ConfigError to exit code 2 and every other Error to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite state encountered while integrating an SDE path.
class SimulationDiverged : public Error {
 public:
  explicit SimulationDiverged(const std::string& what,
                              double time = std::numeric_limits<double>::quiet_NaN(),
                              long particle = -1)
      : Error(what), time(time), particle(particle) {}

  double time;    // time of the offending step, NaN if unknown
  long particle;  // particle index, -1 if not ensemble context
};

/// Every importance weight collapsed to -inf.
class DegenerateWeights : public Error {
 public:
  using Error::Error;
};

/// Filter-level weight collapse at an observation.
class FilterDegenerate : public Error {
 public:
  FilterDegenerate(const std::string& what, int observation_index)
      : Error(what), observation_index(observation_index) {}

  int observation_index;
};

/// All Girsanov weights of a bridge batch underflowed: the bridge proposal
/// is catastrophically mismatched to the target endpoints.
class DegenerateBatch : public Error {
 public:
  using Error::Error;
};

class MissingHistory : public Error {
 public:
  using Error::Error;
};

class PrecisionUnavailable : public Error {
 public:
  using Error::Error;
};

class DegeneratePrecision : public Error {
 public:
  using Error::Error;
};

/// Every pair of a smoothing window failed to produce a usable bridge batch.
class SmootherFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace smcs
