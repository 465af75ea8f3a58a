#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "bornseq/data_io.hpp"
#include "bornseq/training.hpp"

namespace bornseq::cli {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerificationFailed = 1;
inline constexpr int kExitInputError = 2;

/// Everything `train` needs, as one flat key namespace.
struct RunConfig {
  TrainConfig train;
  std::string data;
  int target_n = 0;  // 0: modal length of the input
  LengthPolicy length_policy = LengthPolicy::pad;
  double test_fraction = 0.1;  // 0 disables the held-out split
  int d_max = 8;
  int p = 4;
  std::string out = ".";
  EmbeddingMode embedding = EmbeddingMode::trainable;
  std::string alphabet = "nucleotide";  // or a literal symbol list such as "ABCD"

  /// Throws ConfigError naming the first invalid key.
  void validate() const;
};

/// Key/value view used for config files, flag overrides and the run manifest.
/// Values are JSON literals (numbers, strings, booleans).
std::map<std::string, std::string> config_keys();

/// Applies a flat JSON object; unknown keys and type mismatches raise ConfigError.
void apply_config_json(RunConfig& config, const std::string& json_text);
/// Applies a single override given as text (as from the command line).
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value);
/// Resolved configuration as a flat JSON object; loading it reproduces the run.
std::string config_to_json(const RunConfig& config);

Vocab vocab_for_alphabet(const std::string& alphabet);

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bornseq::cli
