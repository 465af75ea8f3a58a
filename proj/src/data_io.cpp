#include "bornseq/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "bornseq/errors.hpp"
#include "bornseq/rng.hpp"

namespace bornseq {

namespace {

char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

}  // namespace

Vocab Vocab::nucleotide(char canonical) {
  canonical = upper(canonical);
  if (canonical != 'U' && canonical != 'T') throw InputError("Vocab::nucleotide: canonical letter must be U or T");
  Vocab v;
  v.symbols_ = std::string("ACG") + canonical;
  v.aliases_ = {{canonical == 'U' ? 'T' : 'U', 3}};
  return v;
}

Vocab Vocab::from_symbols(std::string_view symbols) {
  Vocab v;
  for (char c : symbols) {
    const char u = upper(c);
    if (std::isspace(static_cast<unsigned char>(c)) || u == kPadSymbol)
      throw InputError("Vocab::from_symbols: whitespace and '-' are reserved");
    if (v.symbols_.find(u) != std::string::npos) throw InputError(std::string("Vocab::from_symbols: duplicate symbol ") + c);
    v.symbols_.push_back(u);
  }
  if (v.symbols_.empty()) throw InputError("Vocab::from_symbols: empty alphabet");
  return v;
}

Vocab Vocab::with_pad() const {
  Vocab v = *this;
  v.has_pad_ = true;
  return v;
}

Vocab Vocab::restore(std::string symbols, std::vector<std::pair<char, int>> aliases, bool has_pad) {
  Vocab v = from_symbols(symbols);
  for (const auto& [c, idx] : aliases) {
    if (idx < 0 || idx >= static_cast<int>(v.symbols_.size()))
      throw InputError("Vocab::restore: alias index out of range");
    if (v.index_of(c)) throw InputError(std::string("Vocab::restore: alias collides with symbol ") + c);
    v.aliases_.emplace_back(upper(c), idx);
  }
  v.has_pad_ = has_pad;
  return v;
}

std::optional<int> Vocab::pad_index() const {
  if (!has_pad_) return std::nullopt;
  return static_cast<int>(symbols_.size());
}

std::optional<int> Vocab::index_of(char c) const {
  const char u = upper(c);
  if (const auto pos = symbols_.find(u); pos != std::string::npos) return static_cast<int>(pos);
  for (const auto& [alias, idx] : aliases_)
    if (alias == u) return idx;
  return std::nullopt;
}

char Vocab::symbol_of(int token) const {
  if (token >= 0 && token < static_cast<int>(symbols_.size())) return symbols_[token];
  if (has_pad_ && token == static_cast<int>(symbols_.size())) return kPadSymbol;
  throw InputError("Vocab::symbol_of: token " + std::to_string(token) + " out of range");
}

std::vector<FastaRecord> parse_fasta(std::string_view text) {
  std::vector<FastaRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (!line.empty() && line.front() == '>') {
      std::string_view id = line.substr(1);
      while (!id.empty() && std::isspace(static_cast<unsigned char>(id.back()))) id.remove_suffix(1);
      while (!id.empty() && std::isspace(static_cast<unsigned char>(id.front()))) id.remove_prefix(1);
      records.push_back({std::string(id), {}});
      continue;
    }
    const bool blank = std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
    if (records.empty()) {
      if (blank) continue;
      throw FormatError("FASTA: sequence data before the first '>' header at line " + std::to_string(line_no));
    }
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) records.back().sequence.push_back(c);
  }
  return records;
}

std::vector<FastaRecord> read_fasta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open FASTA file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_fasta(buf.str());
}

std::string format_fasta(const std::vector<FastaRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += '>';
    out += r.id;
    out += '\n';
    out += r.sequence;
    out += '\n';
  }
  return out;
}

LengthPolicy parse_length_policy(std::string_view name) {
  if (name == "pad") return LengthPolicy::pad;
  if (name == "truncate") return LengthPolicy::truncate;
  if (name == "reject") return LengthPolicy::reject;
  throw InputError("unknown length policy '" + std::string(name) + "' (expected pad, truncate or reject)");
}

std::string_view to_string(LengthPolicy policy) {
  switch (policy) {
    case LengthPolicy::pad: return "pad";
    case LengthPolicy::truncate: return "truncate";
    case LengthPolicy::reject: return "reject";
  }
  return "pad";
}

TokenizeResult tokenize(std::string_view raw, const Vocab& vocab, int target_n, LengthPolicy policy) {
  if (target_n < 1) throw InputError("tokenize: target length must be >= 1");
  if (policy == LengthPolicy::pad && !vocab.pad_index())
    throw ConfigError("tokenize: the pad policy needs a vocab with a PAD token");
  TokenizeResult result;
  for (char c : raw) {
    const auto idx = vocab.index_of(c);
    if (!idx) {
      result.tokens.clear();
      result.rejection = std::string("unknown symbol ") + c;
      return result;
    }
    result.tokens.push_back(*idx);
  }
  const int len = static_cast<int>(result.tokens.size());
  if (len == target_n) return result;

  const bool longer = len > target_n;
  if (longer && policy == LengthPolicy::truncate) {
    result.tokens.resize(target_n);
  } else if (!longer && policy == LengthPolicy::pad) {
    result.tokens.resize(target_n, *vocab.pad_index());
  } else {
    result.tokens.clear();
    result.rejection = "length " + std::to_string(len) + (longer ? " exceeds " : " is below ") + "target " +
                       std::to_string(target_n);
  }
  return result;
}

std::string detokenize(const Sequence& tokens, const Vocab& vocab) {
  std::string out;
  out.reserve(tokens.size());
  for (int t : tokens) out.push_back(vocab.symbol_of(t));
  return out;
}

int modal_length(const std::vector<FastaRecord>& records) {
  if (records.empty()) throw InputError("modal_length: no records");
  std::map<std::size_t, int> counts;
  for (const auto& r : records) ++counts[r.sequence.size()];
  std::size_t best = 0;
  int best_count = -1;
  for (const auto& [len, count] : counts)
    if (count >= best_count) {
      best = len;
      best_count = count;
    }
  return static_cast<int>(best);
}

Dataset build_dataset(const std::vector<FastaRecord>& records, const Vocab& vocab, int target_n, LengthPolicy policy,
                      std::string source) {
  Dataset ds;
  ds.n = target_n > 0 ? target_n : modal_length(records);
  if (ds.n < 1) throw InputError("build_dataset: target length resolves to 0");
  ds.vocab = policy == LengthPolicy::pad && !vocab.pad_index() ? vocab.with_pad() : vocab;
  ds.source = std::move(source);
  ds.policy = policy;
  for (const auto& r : records) {
    auto result = tokenize(r.sequence, ds.vocab, ds.n, policy);
    if (!result.ok()) {
      ds.rejected.push_back({r.id, result.rejection});
      continue;
    }
    const auto len = static_cast<int>(r.sequence.size());
    if (len < ds.n) ++ds.padded;
    if (len > ds.n) ++ds.truncated;
    ds.sequences.push_back(std::move(result.tokens));
  }
  return ds;
}

void write_rejections_csv(const std::string& path, const std::vector<Rejection>& rejected) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write rejection report: " + path);
  out << "id,reason\n";
  auto quoted = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  };
  for (const auto& r : rejected) out << quoted(r.id) << ',' << quoted(r.reason) << '\n';
}

std::pair<std::vector<Sequence>, std::vector<Sequence>> split(const std::vector<Sequence>& data, double test_fraction,
                                                              std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InputError("split: test_fraction must lie in (0, 1)");
  const auto total = data.size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(total)));
  if (n_test == 0 || n_test >= total) {
    std::ostringstream msg;
    msg << "split: fraction " << test_fraction << " of " << total << " items leaves an empty split";
    throw InputError(msg.str());
  }
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::pair<std::vector<Sequence>, std::vector<Sequence>> out;
  for (std::size_t k = 0; k < total; ++k) (k < n_test ? out.second : out.first).push_back(data[order[k]]);
  return out;
}

}  // namespace bornseq
