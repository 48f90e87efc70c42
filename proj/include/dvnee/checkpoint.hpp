#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dvnee/mlp.hpp"

namespace dvnee {

/// Binary parameter file: magic, format version, a free-form metadata
/// string (the run configuration as JSON), then named row-major tensors.
/// Doubles are stored as their raw IEEE-754 bits, so reads are bit-exact.
struct Checkpoint {
  static constexpr char kMagic[8] = {'D', 'V', 'N', 'E', 'C', 'K', 'P', 'T'};
  static constexpr std::uint32_t kVersion = 1;

  std::string metadata;
  std::vector<std::pair<std::string, Tensor2>> tensors;

  const Tensor2* find(const std::string& name) const;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(const std::string& path, const std::string& metadata, const NamedTensors& tensors);
Checkpoint read_checkpoint(const std::string& path);

/// Copies every named tensor out of `ck`; missing names or shape mismatches throw.
void load_tensors(const Checkpoint& ck, const NamedTensors& into);

}  // namespace dvnee
