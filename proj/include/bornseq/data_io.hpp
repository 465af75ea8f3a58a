#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bornseq/training.hpp"

namespace bornseq {

/// Symbol alphabet with dense indices. Lookup is case-insensitive; aliases map
/// extra letters onto existing indices (T and U share one token in the
/// nucleotide alphabet). An optional PAD token takes the last index.
class Vocab {
 public:
  /// A, C, G, U/T -> 0, 1, 2, 3. `canonical` ('U' or 'T') is emitted by detokenize.
  static Vocab nucleotide(char canonical = 'U');
  /// One token per distinct character of `symbols`, in order.
  static Vocab from_symbols(std::string_view symbols);

  Vocab with_pad() const;

  /// Number of tokens including PAD.
  int size() const { return static_cast<int>(symbols_.size()) + (has_pad_ ? 1 : 0); }
  std::optional<int> pad_index() const;
  const std::string& symbols() const { return symbols_; }
  const std::vector<std::pair<char, int>>& aliases() const { return aliases_; }

  std::optional<int> index_of(char c) const;
  /// PAD renders as kPadSymbol.
  char symbol_of(int token) const;

  static constexpr char kPadSymbol = '-';

  /// Rebuilds a vocab from its stored parts (checkpoint loading).
  static Vocab restore(std::string symbols, std::vector<std::pair<char, int>> aliases, bool has_pad);

  friend bool operator==(const Vocab&, const Vocab&) = default;

 private:
  std::string symbols_;
  std::vector<std::pair<char, int>> aliases_;
  bool has_pad_ = false;
};

struct FastaRecord {
  std::string id;
  std::string sequence;
};

/// Records start at '>' lines; following lines are concatenated with all
/// whitespace removed. Blank lines before the first header are allowed; any
/// other content there raises FormatError with its line number.
std::vector<FastaRecord> parse_fasta(std::string_view text);
std::vector<FastaRecord> read_fasta(const std::string& path);
std::string format_fasta(const std::vector<FastaRecord>& records);

enum class LengthPolicy {
  pad,       // shorter: append PAD; longer: reject
  truncate,  // longer: keep the first n; shorter: reject
  reject,    // anything but exactly n: reject
};

LengthPolicy parse_length_policy(std::string_view name);
std::string_view to_string(LengthPolicy policy);

struct TokenizeResult {
  Sequence tokens;
  std::string rejection;  // empty on success

  bool ok() const { return rejection.empty(); }
};

/// The pad policy requires a vocab with a PAD token.
TokenizeResult tokenize(std::string_view raw, const Vocab& vocab, int target_n, LengthPolicy policy);

std::string detokenize(const Sequence& tokens, const Vocab& vocab);

struct Rejection {
  std::string id;
  std::string reason;
};

struct Dataset {
  std::vector<Sequence> sequences;
  int n = 0;
  Vocab vocab;
  std::string source;
  LengthPolicy policy = LengthPolicy::pad;
  int padded = 0;
  int truncated = 0;
  std::vector<Rejection> rejected;
};

/// Most common record length (ties go to the longer length).
int modal_length(const std::vector<FastaRecord>& records);

/// Tokenizes every record. target_n <= 0 selects the modal length. Under the
/// pad policy the vocab is extended with PAD.
Dataset build_dataset(const std::vector<FastaRecord>& records, const Vocab& vocab, int target_n, LengthPolicy policy,
                      std::string source = {});

/// CSV with columns id,reason.
void write_rejections_csv(const std::string& path, const std::vector<Rejection>& rejected);

/// Seeded uniform shuffle, then the first round(test_fraction * N) items form the test split.
std::pair<std::vector<Sequence>, std::vector<Sequence>> split(const std::vector<Sequence>& data,
                                                              double test_fraction, std::uint64_t seed);

}  // namespace bornseq
