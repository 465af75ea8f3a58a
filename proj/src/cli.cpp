#include "bornseq/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bornseq/checkpoint.hpp"
#include "bornseq/errors.hpp"
#include "bornseq/evaluation.hpp"
#include "bornseq/inference.hpp"
#include "bornseq/linalg.hpp"

namespace bornseq::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum class Kind { integer, unsigned_integer, real, boolean, text };

struct ConfigKey {
  const char* name;
  const char* help;
  Kind kind;
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

const std::vector<ConfigKey>& config_key_table() {
  static const std::vector<ConfigKey> table = {
      {"data", "FASTA training file", Kind::text, [](RunConfig& c, const json& j) { c.data = j.get<std::string>(); },
       [](const RunConfig& c) { return json(c.data); }},
      {"target_n", "sequence length (0 = modal length)", Kind::integer,
       [](RunConfig& c, const json& j) { c.target_n = j.get<int>(); }, [](const RunConfig& c) { return json(c.target_n); }},
      {"length_policy", "pad | truncate | reject", Kind::text,
       [](RunConfig& c, const json& j) { c.length_policy = parse_length_policy(j.get<std::string>()); },
       [](const RunConfig& c) { return json(std::string(to_string(c.length_policy))); }},
      {"test_fraction", "held-out fraction (0 disables)", Kind::real,
       [](RunConfig& c, const json& j) { c.test_fraction = j.get<double>(); },
       [](const RunConfig& c) { return json(c.test_fraction); }},
      {"d_max", "maximum bond dimension", Kind::integer, [](RunConfig& c, const json& j) { c.d_max = j.get<int>(); },
       [](const RunConfig& c) { return json(c.d_max); }},
      {"p", "physical dimension (forced to v for one-hot)", Kind::integer,
       [](RunConfig& c, const json& j) { c.p = j.get<int>(); }, [](const RunConfig& c) { return json(c.p); }},
      {"out", "output directory", Kind::text, [](RunConfig& c, const json& j) { c.out = j.get<std::string>(); },
       [](const RunConfig& c) { return json(c.out); }},
      {"embedding", "trainable | one-hot", Kind::text,
       [](RunConfig& c, const json& j) {
         const auto s = j.get<std::string>();
         if (s == "trainable") c.embedding = EmbeddingMode::trainable;
         else if (s == "one-hot") c.embedding = EmbeddingMode::one_hot;
         else throw ConfigError("config key 'embedding' must be 'trainable' or 'one-hot'");
       },
       [](const RunConfig& c) { return json(c.embedding == EmbeddingMode::one_hot ? "one-hot" : "trainable"); }},
      {"alphabet", "'nucleotide' or a literal symbol list", Kind::text,
       [](RunConfig& c, const json& j) { c.alphabet = j.get<std::string>(); },
       [](const RunConfig& c) { return json(c.alphabet); }},
      {"lr_mps", "learning rate of the MPS tensors", Kind::real,
       [](RunConfig& c, const json& j) { c.train.lr_mps = j.get<double>(); },
       [](const RunConfig& c) { return json(c.train.lr_mps); }},
      {"lr_emb", "learning rate of the embedding", Kind::real,
       [](RunConfig& c, const json& j) { c.train.lr_emb = j.get<double>(); },
       [](const RunConfig& c) { return json(c.train.lr_emb); }},
      {"batch_size", "mini-batch size", Kind::integer,
       [](RunConfig& c, const json& j) { c.train.batch_size = j.get<int>(); },
       [](const RunConfig& c) { return json(c.train.batch_size); }},
      {"epochs", "training epochs", Kind::integer, [](RunConfig& c, const json& j) { c.train.epochs = j.get<int>(); },
       [](const RunConfig& c) { return json(c.train.epochs); }},
      {"adam_beta1", "Adam beta1", Kind::real, [](RunConfig& c, const json& j) { c.train.adam_beta1 = j.get<double>(); },
       [](const RunConfig& c) { return json(c.train.adam_beta1); }},
      {"adam_beta2", "Adam beta2", Kind::real, [](RunConfig& c, const json& j) { c.train.adam_beta2 = j.get<double>(); },
       [](const RunConfig& c) { return json(c.train.adam_beta2); }},
      {"adam_eps", "Adam epsilon", Kind::real, [](RunConfig& c, const json& j) { c.train.adam_eps = j.get<double>(); },
       [](const RunConfig& c) { return json(c.train.adam_eps); }},
      {"seed", "run seed", Kind::unsigned_integer,
       [](RunConfig& c, const json& j) { c.train.seed = j.get<std::uint64_t>(); },
       [](const RunConfig& c) { return json(c.train.seed); }},
      {"freeze_embedding", "keep the embedding fixed", Kind::boolean,
       [](RunConfig& c, const json& j) { c.train.freeze_embedding = j.get<bool>(); },
       [](const RunConfig& c) { return json(c.train.freeze_embedding); }},
      {"log_clamp", "probability floor inside the log", Kind::real,
       [](RunConfig& c, const json& j) { c.train.log_clamp = j.get<double>(); },
       [](const RunConfig& c) { return json(c.train.log_clamp); }},
  };
  return table;
}

const ConfigKey& find_key(const std::string& name) {
  for (const auto& key : config_key_table())
    if (name == key.name) return key;
  throw ConfigError("unknown config key '" + name + "'");
}

bool kind_matches(Kind kind, const json& j) {
  switch (kind) {
    case Kind::integer: return j.is_number_integer();
    case Kind::unsigned_integer: return j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0);
    case Kind::real: return j.is_number();
    case Kind::boolean: return j.is_boolean();
    case Kind::text: return j.is_string();
  }
  return false;
}

void set_key(RunConfig& config, const std::string& key, const json& value) {
  const ConfigKey& entry = find_key(key);
  if (!kind_matches(entry.kind, value)) throw ConfigError("config key '" + key + "' has the wrong type");
  try {
    entry.set(config, value);
  } catch (const InputError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

std::string read_text(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(std::string("cannot open ") + what + ": " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// ---- train -----------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::map<std::string, std::string>& overrides, std::ostream& out) {
  RunConfig config;
  if (!config_path.empty()) apply_config_json(config, read_text(config_path, "config file"));
  for (const auto& [key, value] : overrides) apply_config_value(config, key, value);
  if (config.embedding == EmbeddingMode::one_hot) config.train.freeze_embedding = true;
  config.validate();

  if (!fs::exists(config.data)) throw InputError("data file not found: " + config.data);
  const auto records = read_fasta(config.data);
  if (records.empty()) throw InputError("no FASTA records in " + config.data);
  Dataset ds = build_dataset(records, vocab_for_alphabet(config.alphabet), config.target_n, config.length_policy,
                             config.data);
  if (ds.sequences.empty()) throw InputError("every record of " + config.data + " was rejected");
  const int v = ds.vocab.size();
  if (config.embedding == EmbeddingMode::one_hot) config.p = v;

  std::vector<Sequence> train_set = ds.sequences;
  std::vector<Sequence> test_set;
  const Rng root(config.train.seed);
  if (config.test_fraction > 0.0)
    std::tie(train_set, test_set) = split(ds.sequences, config.test_fraction, root.split(4).next_u64());

  ensure_dir(config.out);
  const fs::path dir(config.out);
  write_text(dir / "manifest.json", config_to_json(config));
  write_rejections_csv((dir / "rejections.csv").string(), ds.rejected);

  Model model = init_model(ds.n, v, config.p, config.d_max, config.embedding, config.train.seed);
  out << "train: n=" << ds.n << " v=" << v << " p=" << config.p << " d_max=" << config.d_max
      << " train=" << train_set.size() << " test=" << test_set.size() << " rejected=" << ds.rejected.size() << '\n';
  const TrainResult result = train(std::move(model), train_set, test_set, config.train, [&](const HistoryRow& row) {
    out << "epoch " << row.epoch << " train_nll " << row.train_nll;
    if (std::isfinite(row.test_nll)) out << " test_nll " << row.test_nll;
    out << " isometry_dev " << row.max_isometry_dev << '\n';
  });

  write_history_csv((dir / "history.csv").string(), result.history);
  save_checkpoint({result.model, ds.vocab, config.train, config.train.seed}, (dir / "checkpoint.json").string());
  out << "wrote " << (dir / "checkpoint.json").string() << '\n';
  return kExitOk;
}

// ---- sample ----------------------------------------------------------------

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("invalid integer '" + item + "' in list '" + text + "'");
    }
  }
  return values;
}

struct SampleOptions {
  std::string checkpoint;
  long count = 1;
  std::string order = "forward";
  std::string explicit_order;
  std::string mask;
  std::string mode = "stochastic";
  std::uint64_t seed = 0;
  std::string out = ".";
};

int cmd_sample(const SampleOptions& opt, std::ostream& out) {
  if (opt.count < 0) throw InputError("--count must be >= 0");
  const ModelBundle bundle = load_checkpoint(opt.checkpoint);
  const Model& model = bundle.model;
  const Povm povm = model.povm();
  const int n = model.n();

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (opt.order == "reverse") {
    std::reverse(order.begin(), order.end());
  } else if (opt.order == "explicit") {
    order = parse_int_list(opt.explicit_order);
  } else if (opt.order != "forward" && opt.order != "random") {
    throw InputError("--order must be forward, reverse, random or explicit");
  }

  std::optional<std::vector<int>> tmpl;
  if (!opt.mask.empty()) {
    if (static_cast<int>(opt.mask.size()) != n) {
      std::ostringstream msg;
      msg << "mask length " << opt.mask.size() << " does not match sequence length " << n;
      throw InputError(msg.str());
    }
    tmpl.emplace();
    for (char c : opt.mask) {
      if (c == '_') {
        tmpl->push_back(kHole);
      } else if (c == Vocab::kPadSymbol && bundle.vocab.pad_index()) {
        tmpl->push_back(*bundle.vocab.pad_index());
      } else if (const auto idx = bundle.vocab.index_of(c)) {
        tmpl->push_back(*idx);
      } else {
        throw InputError(std::string("mask contains unknown symbol ") + c);
      }
    }
  }
  FillMode mode = FillMode::stochastic;
  if (opt.mode == "greedy") mode = FillMode::greedy;
  else if (opt.mode != "stochastic") throw InputError("--mode must be stochastic or greedy");

  Rng rng(opt.seed);
  const auto pad = bundle.vocab.pad_index();
  std::vector<FastaRecord> records;
  for (long k = 0; k < opt.count; ++k) {
    std::vector<int> tokens;
    if (tmpl) {
      tokens = masked_fill(model.mps, povm, *tmpl, rng, mode);
    } else {
      if (opt.order == "random") rng.shuffle(order);
      tokens = sample(model.mps, povm, order, rng);
    }
    std::string id = "sample_" + std::to_string(k + 1);
    if (pad) {
      while (!tokens.empty() && tokens.back() == *pad) tokens.pop_back();
      if (std::find(tokens.begin(), tokens.end(), *pad) != tokens.end()) id += " interior_pad";
    }
    records.push_back({id, detokenize(tokens, bundle.vocab)});
  }

  ensure_dir(opt.out);
  const fs::path path = fs::path(opt.out) / "samples.fasta";
  write_text(path, format_fasta(records));
  out << "wrote " << records.size() << " sequences to " << path.string() << '\n';
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string out = ".";
  std::size_t pairs = 0;  // 0 = all
  double pseudocount = 0.0;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  const ModelBundle bundle = load_checkpoint(opt.checkpoint);
  if (!fs::exists(opt.data)) throw InputError("data file not found: " + opt.data);
  const auto records = read_fasta(opt.data);
  if (records.empty()) throw InputError("no FASTA records in " + opt.data);
  const Model& model = bundle.model;
  const LengthPolicy policy = bundle.vocab.pad_index() ? LengthPolicy::pad : LengthPolicy::reject;
  const Dataset ds = build_dataset(records, bundle.vocab, model.n(), policy, opt.data);
  if (!ds.rejected.empty())
    throw InputError("test record '" + ds.rejected.front().id + "' does not fit the model: " + ds.rejected.front().reason);

  const Povm povm = model.povm();
  const int v = povm.v;
  Rng rng(opt.seed);
  const auto pairs = opt.pairs == 0 ? all_pairs(model.n()) : subsample_pairs(model.n(), opt.pairs, rng);
  const StatBundle model_stats{model_site_marginals(model.mps, povm), model_pair_correlations(model.mps, povm, pairs)};
  const StatBundle data_stats{empirical_site_marginals(ds.sequences, v, opt.pseudocount),
                              empirical_pair_correlations(ds.sequences, v, pairs, opt.pseudocount)};

  ensure_dir(opt.out);
  const fs::path dir(opt.out);
  scatter_export(model_stats, data_stats, (dir / "scatter.csv").string());
  const auto stats = agreement(scatter_rows(model_stats, data_stats));
  const double nll = test_nll(model.mps, povm, ds.sequences, bundle.config.log_clamp);

  json metrics = {{"test_nll", number_or_null(nll)},
                  {"sequences", ds.sequences.size()},
                  {"site_rms", number_or_null(stats.site_rms)},
                  {"site_features", stats.site_count},
                  {"pair_rms", number_or_null(stats.pair_rms)},
                  {"pair_features", stats.pair_count},
                  {"pairs_evaluated", pairs.size()},
                  {"log_base", "e"}};
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  out << metrics.dump(2) << '\n';
  return kExitOk;
}

// ---- check -----------------------------------------------------------------

struct CheckOptions {
  std::string checkpoint;
  std::uint64_t seed = 0;
  double brute_force_limit = 1e6;
  std::size_t fd_limit = 4000;  // real parameters
  std::string out;
};

int cmd_check(const CheckOptions& opt, std::ostream& out) {
  const ModelBundle bundle = load_checkpoint(opt.checkpoint);
  const Model& model = bundle.model;
  json checks = json::array();
  bool all_pass = true;
  auto record = [&](json entry, bool pass) {
    entry["status"] = pass ? "pass" : "fail";
    all_pass = all_pass && pass;
    checks.push_back(std::move(entry));
  };

  const Povm povm = model.povm();
  const PovmReport pr = validate_povm(povm, 1e-10);
  record({{"name", "povm_validity"},
          {"tolerance", 1e-10},
          {"max_hermiticity_dev", number_or_null(pr.max_hermiticity_dev)},
          {"min_eigenvalue", number_or_null(pr.min_eigenvalue)},
          {"completeness_dev", number_or_null(pr.completeness_dev)}},
         pr.pass);

  const IsometryReport ir = check_isometry(model.mps, 1e-8);
  json site_devs = json::array();
  for (double d : ir.site_deviation) site_devs.push_back(number_or_null(d));
  record({{"name", "isometry"}, {"tolerance", 1e-8}, {"max_deviation", number_or_null(ir.max_deviation)},
          {"site_deviation", site_devs}},
         ir.pass);

  const double states = std::pow(static_cast<double>(povm.v), model.n());
  if (states <= opt.brute_force_limit) {
    std::vector<int> seq(model.n(), 0);
    double total = 0.0;
    for (long long k = 0; k < static_cast<long long>(states); ++k) {
      total += sequence_probability(model.mps, povm, seq);
      for (int i = model.n() - 1; i >= 0; --i) {
        if (++seq[i] < povm.v) break;
        seq[i] = 0;
      }
    }
    const double dev = std::abs(total - 1.0);
    record({{"name", "normalization"}, {"tolerance", 1e-8}, {"total_probability", total}, {"deviation", dev}},
           dev <= 1e-8);
  } else {
    checks.push_back({{"name", "normalization"}, {"status", "skipped (state space too large)"}});
  }

  std::size_t params = 0;
  for (const auto& t : model.mps.tensors()) params += 2 * t.size();
  if (model.embedding.is_trainable() && !bundle.config.freeze_embedding)
    params += 2 * static_cast<std::size_t>(model.embedding.params().gamma.size());
  if (!pr.pass || !ir.pass) {
    checks.push_back({{"name", "gradient"}, {"status", "skipped (model invariants failed)"}});
  } else if (params <= opt.fd_limit) {
    Rng rng(opt.seed);
    std::vector<int> order(model.n());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Sequence> batch;
    for (int k = 0; k < 8; ++k) batch.push_back(sample(model.mps, povm, order, rng));
    const double err = finite_diff_check(model, batch, 1e-6, bundle.config.freeze_embedding, bundle.config.log_clamp);
    record({{"name", "gradient"}, {"tolerance", 1e-5}, {"eps", 1e-6}, {"max_relative_error", number_or_null(err)}},
           err <= 1e-5);
  } else {
    checks.push_back({{"name", "gradient"}, {"status", "skipped (model too large)"}});
  }

  const json report = {{"checkpoint", opt.checkpoint}, {"checks", checks}, {"pass", all_pass}};
  if (!opt.out.empty()) {
    ensure_dir(opt.out);
    write_text(fs::path(opt.out) / "check.json", report.dump(2) + "\n");
  }
  out << report.dump(2) << '\n';
  return all_pass ? kExitOk : kExitVerificationFailed;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  if (data.empty()) throw ConfigError("config key 'data' is required");
  if (target_n < 0) throw ConfigError("config key 'target_n' must be >= 0");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("config key 'test_fraction' must lie in [0, 1)");
  if (d_max < 1) throw ConfigError("config key 'd_max' must be >= 1");
  if (p < 1) throw ConfigError("config key 'p' must be >= 1");
  if (out.empty()) throw ConfigError("config key 'out' must not be empty");
  try {
    vocab_for_alphabet(alphabet);
  } catch (const InputError& e) {
    throw ConfigError(std::string("config key 'alphabet': ") + e.what());
  }
}

std::map<std::string, std::string> config_keys() {
  std::map<std::string, std::string> keys;
  for (const auto& key : config_key_table()) keys[key.name] = key.help;
  return keys;
}

void apply_config_json(RunConfig& config, const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config file must hold a flat JSON object");
  for (const auto& [key, value] : root.items()) set_key(config, key, value);
}

void apply_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  const ConfigKey& entry = find_key(key);
  if (entry.kind == Kind::text) {
    set_key(config, key, json(value));
    return;
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    throw ConfigError("config key '" + key + "' has an unparsable value '" + value + "'");
  }
  set_key(config, key, parsed);
}

std::string config_to_json(const RunConfig& config) {
  json root = json::object();
  for (const auto& key : config_key_table()) root[key.name] = key.get(config);
  return root.dump(2) + "\n";
}

Vocab vocab_for_alphabet(const std::string& alphabet) {
  if (alphabet == "nucleotide") return Vocab::nucleotide('U');
  return Vocab::from_symbols(alphabet);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Born machine sequence model with trainable POVM token embedding", "bornseq"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "train a model from a FASTA file");
  std::string config_path;
  train_cmd->add_option("--config", config_path, "flat JSON config file");
  std::map<std::string, std::string> overrides;
  for (const auto& key : config_key_table()) {
    train_cmd->add_option_function<std::string>(
        std::string("--") + key.name, [&overrides, name = std::string(key.name)](const std::string& v) {
          overrides[name] = v;
        },
        key.help);
  }

  SampleOptions sopt;
  auto* sample_cmd = app.add_subcommand("sample", "generate sequences from a checkpoint");
  sample_cmd->add_option("--checkpoint", sopt.checkpoint, "checkpoint file")->required();
  sample_cmd->add_option("--count", sopt.count, "number of sequences");
  sample_cmd->add_option("--order", sopt.order, "forward | reverse | random | explicit");
  sample_cmd->add_option("--explicit-order", sopt.explicit_order, "comma-separated site order for --order explicit");
  sample_cmd->add_option("--mask", sopt.mask, "template with '_' marking positions to fill");
  sample_cmd->add_option("--mode", sopt.mode, "stochastic | greedy (masked fill)");
  sample_cmd->add_option("--seed", sopt.seed, "sampling seed");
  sample_cmd->add_option("--out", sopt.out, "output directory (samples.fasta)");

  EvalOptions eopt;
  auto* eval_cmd = app.add_subcommand("eval", "compare model statistics with a test set");
  eval_cmd->add_option("--checkpoint", eopt.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", eopt.data, "FASTA test file")->required();
  eval_cmd->add_option("--out", eopt.out, "output directory (metrics.json, scatter.csv)");
  eval_cmd->add_option("--pairs", eopt.pairs, "number of site pairs to subsample (0 = all)");
  eval_cmd->add_option("--pseudocount", eopt.pseudocount, "pseudocount for empirical frequencies");
  eval_cmd->add_option("--seed", eopt.seed, "pair subsampling seed");

  CheckOptions copt;
  auto* check_cmd = app.add_subcommand("check", "verify model invariants");
  check_cmd->add_option("--checkpoint", copt.checkpoint, "checkpoint file")->required();
  check_cmd->add_option("--seed", copt.seed, "seed for the gradient-check batch");
  check_cmd->add_option("--out", copt.out, "also write check.json into this directory");
  check_cmd->add_option("--brute-force-limit", copt.brute_force_limit, "largest v^n to enumerate");
  check_cmd->add_option("--fd-limit", copt.fd_limit, "largest real-parameter count for finite differences");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(config_path, overrides, out);
    if (sample_cmd->parsed()) return cmd_sample(sopt, out);
    if (eval_cmd->parsed()) return cmd_eval(eopt, out);
    if (check_cmd->parsed()) return cmd_check(copt, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace bornseq::cli
