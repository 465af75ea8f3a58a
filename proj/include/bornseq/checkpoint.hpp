#pragma once

#include <cstdint>
#include <string>

#include "bornseq/data_io.hpp"
#include "bornseq/training.hpp"

namespace bornseq {

inline constexpr const char* kCheckpointFormat = "bornseq-ckpt-1";

struct ModelBundle {
  Model model;
  Vocab vocab;
  TrainConfig config;
  std::uint64_t seed = 0;
};

/// JSON text. Complex arrays are flat row-major lists of [re, im] pairs;
/// doubles are written in shortest round-trip form, so load(save(x)) is exact.
std::string checkpoint_to_string(const ModelBundle& bundle);
ModelBundle checkpoint_from_string(const std::string& text);

void save_checkpoint(const ModelBundle& bundle, const std::string& path);
/// Throws LoadError naming the offending field.
ModelBundle load_checkpoint(const std::string& path);

}  // namespace bornseq
