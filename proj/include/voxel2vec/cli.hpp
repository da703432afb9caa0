#pragma once

// Command-line front end: gen | train | simmap | classify | associate.
// Needs CLI11 and OpenSSL (SHA-256 of inputs and outputs) in addition to the library.

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "voxel2vec/abc_flow.hpp"
#include "voxel2vec/config.hpp"
#include "voxel2vec/embedding_io.hpp"
#include "voxel2vec/features.hpp"
#include "voxel2vec/io.hpp"
#include "voxel2vec/similarity.hpp"
#include "voxel2vec/trainer.hpp"
#include "voxel2vec/transfer.hpp"

namespace voxel2vec::cli {

inline constexpr const char* tool_version = "0.1.0";

enum exit_code : int { ok = 0, usage = 2, data = 3, internal = 4 };

// A bad command line that only surfaces after parsing.
class usage_error : public error {
 public:
  using error::error;
};

inline std::string sha256_hex(std::span<const unsigned char> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw invariant_error("SHA-256 computation failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

inline std::string file_sha256(const fs::path& p) { return sha256_hex(detail::read_file(p)); }

// Parses "lo:hi:step" into the inclusive arithmetic sequence lo, lo+step, ...
inline std::vector<double> parse_range(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ':');) {
    try {
      parts.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw usage_error("bad range '" + text + "' (expected lo:hi:step)");
    }
  }
  if (parts.size() != 3 || parts[2] <= 0.0 || parts[1] < parts[0])
    throw usage_error("bad range '" + text + "' (expected lo:hi:step with step > 0 and hi >= lo)");
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (long i = 0; i <= count; ++i) out.push_back(parts[0] + parts[2] * static_cast<double>(i));
  return out;
}

// "64", "64x64x32" or "64,64,32".
inline dims3 parse_dims_text(const std::string& text) {
  std::vector<std::size_t> v;
  std::string cur;
  for (char ch : text + "x") {
    if (ch == 'x' || ch == ',') {
      if (cur.empty() || cur.find_first_not_of("0123456789") != std::string::npos)
        throw usage_error("bad dims '" + text + "'");
      v.push_back(std::stoul(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (v.size() == 1) v = {v[0], v[0], v[0]};
  if (v.size() != 3 || v[0] == 0 || v[1] == 0 || v[2] == 0) throw usage_error("bad dims '" + text + "'");
  return {v[0], v[1], v[2]};
}

inline std::pair<double, double> parse_value_range(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument("");
    const double lo = std::stod(text.substr(0, comma)), hi = std::stod(text.substr(comma + 1));
    if (!(hi > lo)) throw std::invalid_argument("");
    return {lo, hi};
  } catch (const std::exception&) {
    throw usage_error("bad value range '" + text + "' (expected lo,hi with hi > lo)");
  }
}

inline std::string format_number(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

/// Options bound both to flags and to keys of a config or manifest document.
/// Precedence: an explicit flag (or its environment variable), then the document, then the default.
class option_registry {
 public:
  template <class T>
  CLI::Option* add(CLI::App& app, const std::string& flags, const std::string& key, T& target,
                   const std::string& help, bool config_field = false) {
    auto* opt = app.add_option(flags, target, help);
    add_entry(key, opt, target, config_field);
    return opt;
  }

  CLI::Option* add_flag(CLI::App& app, const std::string& flags, const std::string& key, bool& target,
                        const std::string& help) {
    auto* opt = app.add_flag(flags, target, help);
    add_entry(key, opt, target, false);
    return opt;
  }

  // Binds a config field that has no flag so it still round-trips through manifests.
  template <class T>
  void add_hidden(const std::string& key, T& target) {
    add_entry(key, nullptr, target, true);
  }

  void apply(const json& doc) {
    const json options = doc.contains("options") ? doc["options"] : json::object();
    const json config = doc.contains("config") ? doc["config"] : doc;
    for (auto& e : entries_) {
      if (e.opt != nullptr && e.opt->count() > 0) continue;
      const json& src = e.config_field ? config : options;
      if (!src.is_object() || !src.contains(e.key)) continue;
      try {
        e.load(src[e.key]);
      } catch (const nlohmann::json::exception& ex) {
        throw usage_error("config key '" + e.key + "': " + ex.what());
      }
    }
  }

  json options_json() const {
    json out = json::object();
    for (const auto& e : entries_)
      if (!e.config_field) out[e.key] = e.save();
    return out;
  }

 private:
  struct entry {
    std::string key;
    CLI::Option* opt;
    bool config_field;
    std::function<void(const json&)> load;
    std::function<json()> save;
  };

  template <class T>
  void add_entry(const std::string& key, CLI::Option* opt, T& target, bool config_field) {
    entries_.push_back({key, opt, config_field, [&target](const json& j) { j.get_to(target); },
                        [&target] { return json(target); }});
  }

  std::vector<entry> entries_;
};

struct stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

/// Collects what a run read and wrote and emits the manifest.
class run_manifest {
 public:
  explicit run_manifest(std::string command) : command_(std::move(command)) {}

  void input(const fs::path& p) { inputs_.push_back(fs::absolute(p)); }
  void output(const fs::path& p) { outputs_.push_back(p); }
  void timing(const std::string& phase, double seconds) { timings_[phase] = seconds; }
  void note(const std::string& key, json value) { extra_[key] = std::move(value); }

  fs::path write(const fs::path& out_dir, const json& options, const json& config, std::uint64_t seed) const {
    json m;
    m["command"] = command_;
    m["tool_version"] = tool_version;
    m["options"] = options;
    m["config"] = config;
    m["seed"] = seed;
    json ins = json::array();
    for (const auto& p : inputs_) ins.push_back({{"path", p.string()}, {"sha256", file_sha256(p)}});
    m["inputs"] = ins;
    json outs = json::array();
    for (const auto& p : outputs_)
      outs.push_back({{"path", p.lexically_relative(out_dir).generic_string()}, {"sha256", file_sha256(p)}});
    m["outputs"] = outs;
    m["timings"] = timings_;
    for (const auto& [k, v] : extra_.items()) m[k] = v;
    const fs::path path = out_dir / "manifest.json";
    write_text_atomic(path, m.dump(2) + "\n");
    return path;
  }

 private:
  std::string command_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
  json timings_ = json::object();
  json extra_ = json::object();
};

// Loads the selected variables of one volume descriptor.
inline std::vector<volume> load_variables(const volume_descriptor& d, const std::vector<std::string>& vars,
                                          run_manifest* manifest) {
  std::vector<volume> out;
  for (const auto& name : vars) {
    if (!d.has_variable(name)) {
      std::string known;
      for (const auto& n : d.variable_names()) known += (known.empty() ? "" : ", ") + n;
      throw usage_error("unknown variable '" + name + "' (descriptor has: " + known + ")");
    }
    out.push_back(load_raw_volume(d, name));
    if (manifest) manifest->input(d.file_for(name));
  }
  return out;
}

// Quantizes each variable over its own range and symbolizes the tuple.
inline std::vector<quantized_volume> quantize_variables(const std::vector<volume>& vars, int R) {
  std::vector<quantized_volume> q;
  for (const auto& v : vars) q.push_back(quantize(v, R));
  return q;
}

// Picks the volume a single-volume command works on: the top level, or one member by label or index.
inline const volume_descriptor& select_member(const volume_descriptor& d, const std::string& member) {
  if (member.empty()) {
    if (!d.variables.empty()) return d;
    if (!d.time_steps.empty()) return d.time_steps.front();
    if (!d.ensemble.empty()) return d.ensemble.front().second;
    throw descriptor_error("descriptor lists no variables");
  }
  for (const auto& [label, child] : d.ensemble)
    if (label == member) return child;
  for (const auto& child : d.time_steps)
    if (child.time_step && format_number(*child.time_step) == member) return child;
  const auto all = d.time_steps.size() + d.ensemble.size();
  try {
    const auto idx = std::stoul(member);
    if (idx < d.time_steps.size()) return d.time_steps[idx];
    if (idx < all) return d.ensemble[idx - d.time_steps.size()].second;
  } catch (const std::exception&) {
  }
  throw usage_error("no member '" + member + "' in descriptor");
}

struct common_options {
  std::string out_dir;
  std::string config_path;
  std::vector<std::string> vars;
  std::string input;
  bool deterministic = false;
};

inline void add_training_flags(CLI::App& app, option_registry& reg, train_config& cfg) {
  reg.add(app, "--R", "quantization", cfg.quantization, "quantization levels", true);
  reg.add(app, "--n", "context_window", cfg.context_window, "context window radius", true);
  reg.add(app, "--k", "negatives", cfg.negatives, "negative samples per positive", true);
  reg.add(app, "--d", "dimension", cfg.dimension, "embedding dimension", true);
  reg.add(app, "--alpha", "learning_rate", cfg.learning_rate, "learning rate", true);
  reg.add(app, "--lambda", "penalty", cfg.penalty, "norm penalty weight", true);
  reg.add(app, "--epochs", "epochs", cfg.epochs, "training epochs", true);
  reg.add(app, "--seed", "seed", cfg.seed, "random seed", true);
  reg.add(app, "--threads", "threads", cfg.threads, "worker threads (1 = deterministic)", true)->envname("V2V_THREADS");
  reg.add(app, "--batch-size", "batch_size", cfg.batch_size, "pairs per self-paced step", true);
  reg.add(app, "--adaptive", "adaptive_negative_sampling", cfg.adaptive_negative_sampling,
          "exclude center and context from negatives and apply the norm penalty (true/false)", true);
  reg.add(app, "--self-paced", "self_paced", cfg.self_paced, "self-paced negative filtering (true/false)", true);
  reg.add_hidden("subsample_threshold", cfg.subsample_threshold);
  reg.add_hidden("min_samples_per_symbol", cfg.min_samples_per_symbol);
  reg.add_hidden("threshold", cfg.threshold);
  reg.add_hidden("pool_factor", cfg.pool_factor);
}

inline void add_common(CLI::App& app, option_registry& reg, common_options& c, bool with_input = true) {
  reg.add(app, "--out-dir", "out_dir", c.out_dir, "output directory")->required();
  app.add_option("--config", c.config_path, "config JSON or a previous run manifest");
  reg.add_flag(app, "--deterministic", "deterministic", c.deterministic, "force single-threaded, reproducible runs");
  if (with_input) reg.add(app, "--input", "input", c.input, "input descriptor JSON");
}

inline json read_json_file(const fs::path& p) {
  const auto bytes = detail::read_file(p);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw usage_error("cannot parse " + p.string() + ": " + e.what());
  }
}

inline void load_config(option_registry& reg, const common_options& c) {
  if (!c.config_path.empty()) reg.apply(read_json_file(c.config_path));
}

// ---------------------------------------------------------------------------- gen

struct gen_options {
  common_options common;
  bool abc = false;
  double t = 0.0;
  std::string t_range;
  std::string dims = "64";
  std::string sweep;
  double A = abc_params{}.A, B = abc_params{}.B, C = abc_params{}.C;
  std::string variant = "faithful";
  std::string dtype = "float32";
};

inline volume_descriptor write_abc_member(const fs::path& dir, const abc_params& p, double t,
                                          dims3 dims, abc_variant variant, value_kind kind, run_manifest& manifest) {
  const auto fields = gen_abc_flow(p, t, dims, {}, variant);
  volume_descriptor d;
  d.dims = dims;
  d.kind = kind;
  const std::pair<const char*, const volume*> vars[] = {
      {"vx", &fields.vx}, {"vy", &fields.vy}, {"vz", &fields.vz}, {"s1", &fields.s1}};
  for (const auto& [name, vol] : vars) {
    const fs::path file = dir / (std::string(name) + ".raw");
    write_raw_volume(file, vol->data(), kind);
    manifest.output(file);
    d.variables.emplace_back(name, file);
  }
  return d;
}

inline void run_gen(const gen_options& o, const option_registry& reg) {
  if (!o.abc) throw usage_error("gen: only the ABC-flow generator is available; pass --abc");
  if (!o.sweep.empty() && !o.t_range.empty()) throw usage_error("gen: --sweep and --t-range are exclusive");
  const fs::path out = o.common.out_dir;
  const dims3 dims = parse_dims_text(o.dims);
  const value_kind kind = parse_value_kind(o.dtype);
  const abc_variant variant = o.variant == "symmetric" ? abc_variant::symmetric : abc_variant::faithful;
  stopwatch clock;
  run_manifest manifest("gen");
  fs::create_directories(out);

  volume_descriptor root;
  root.dims = dims;
  root.kind = kind;
  const abc_params base{o.A, o.B, o.C};
  if (!o.sweep.empty()) {
    std::vector<double> as{o.A}, bs{o.B};
    std::stringstream ss(o.sweep);
    for (std::string part; std::getline(ss, part, ',');) {
      if (part.size() < 3 || part[1] != '=') throw usage_error("bad sweep term '" + part + "' (expected A=lo:hi:step)");
      if (part[0] == 'A') as = parse_range(part.substr(2));
      else if (part[0] == 'B') bs = parse_range(part.substr(2));
      else throw usage_error("sweep supports parameters A and B only");
    }
    std::size_t index = 0;
    for (double a : as)
      for (double b : bs) {
        const std::string label = "A=" + format_number(a) + ",B=" + format_number(b);
        char name[32];
        std::snprintf(name, sizeof name, "m%03zu", index++);
        auto member = write_abc_member(out / name, {a, b, o.C}, o.t, dims, variant, kind, manifest);
        member.time_step = o.t;
        member.ensemble_params = json{{"A", a}, {"B", b}, {"C", o.C}};
        root.ensemble.emplace_back(label, std::move(member));
      }
  } else if (!o.t_range.empty()) {
    for (double t : parse_range(o.t_range)) {
      auto member = write_abc_member(out / ("t" + format_number(t)), base, t, dims, variant, kind, manifest);
      member.time_step = t;
      root.time_steps.push_back(std::move(member));
    }
  } else {
    root = write_abc_member(out, base, o.t, dims, variant, kind, manifest);
    root.time_step = o.t;
  }
  const fs::path desc = out / "descriptor.json";
  write_text_atomic(desc, to_json(root, out).dump(2) + "\n");
  manifest.output(desc);
  manifest.timing("total", clock.seconds());
  manifest.write(out, reg.options_json(), json::object(), 0);
}

// -------------------------------------------------------------------------- train

inline void run_train(common_options& c, const std::string& member, train_config& cfg,
                      const option_registry& reg) {
  if (c.input.empty()) throw usage_error("train: --input is required");
  if (c.vars.empty()) throw usage_error("train: --vars is required");
  if (c.deterministic) cfg.threads = 1;
  cfg.validate();
  const fs::path out = c.out_dir;
  run_manifest manifest("train");
  stopwatch total;
  const auto desc = load_descriptor(c.input);
  manifest.input(c.input);
  const auto& d = select_member(desc, member);
  const auto vars = load_variables(d, c.vars, &manifest);
  const auto q = quantize_variables(vars, cfg.quantization);
  auto [table, sv] = symbolize(q);
  manifest.timing("load", total.seconds());

  stopwatch train_clock;
  const auto result = train(sv, cfg);
  manifest.timing("train", train_clock.seconds());

  fs::create_directories(out);
  const fs::path emb = out / "embedding.v2v", csv = out / "embedding.csv", log = out / "training_log.json";
  save_embedding(emb, result.model);
  write_text_atomic(csv, embedding_csv(result.model));
  json lj;
  lj["symbols"] = table->size();
  lj["pairs_seen"] = result.log.pairs_seen;
  lj["positives_seen"] = result.log.positives_seen;
  lj["degenerate_draws"] = result.log.degenerate_draws;
  lj["forced_pairs"] = result.log.forced_pairs;
  lj["final_eta"] = result.log.final_eta;
  lj["objective_trace"] = result.log.objective_trace;
  lj["degenerate_vocabulary"] = result.log.degenerate_vocabulary;
  lj["warnings"] = result.log.warnings;
  write_text_atomic(log, lj.dump(2) + "\n");
  for (const auto& p : {emb, csv, log}) manifest.output(p);
  manifest.timing("total", total.seconds());
  json config;
  to_json(config, cfg);
  manifest.write(out, reg.options_json(), config, cfg.seed);
}

// ------------------------------------------------------------------------- simmap

struct simmap_options {
  common_options common;
  std::string value_range = "0,1";
  std::size_t cell = 1;
};

inline void run_simmap(const simmap_options& o, const option_registry& reg) {
  if (o.common.input.empty()) throw usage_error("simmap: --input (embedding file) is required");
  const auto [lo, hi] = parse_value_range(o.value_range);
  const fs::path out = o.common.out_dir;
  run_manifest manifest("simmap");
  stopwatch clock;
  const auto model = load_embedding(o.common.input);
  manifest.input(o.common.input);
  const auto map = compute_similarity_map(model);
  fs::create_directories(out);
  const fs::path csv = out / "simmap.csv", png = out / "simmap.png";
  const auto labels = symbol_labels(model.table().get(), model.symbols());
  write_text_atomic(csv, matrix_csv(map.values, labels));
  write_heatmap(png, map.values, {lo, hi, std::max<std::size_t>(1, o.cell)});
  manifest.output(csv);
  manifest.output(png);
  json zero = json::array();
  for (std::size_t s = 0; s < map.zero_rows.size(); ++s)
    if (map.zero_rows[s]) zero.push_back(s);
  manifest.note("zero_norm_symbols", zero);
  manifest.timing("total", clock.seconds());
  manifest.write(out, reg.options_json(), json::object(), 0);
}

// ----------------------------------------------------------------------- classify

struct classify_cli_options {
  common_options common;
  std::string embedding;
  std::string member;
  int R = train_config{}.quantization;
  double eps = classify_options{}.eps;
  int min_pts = classify_options{}.min_pts;
  std::string metric = "cosine";
  bool raw = false;
  long long min_voxels = -1;  // negative: 0.1% of the voxel count
  std::uint64_t seed = 1;
  int tsne_iterations = 1000;
  double perplexity = 5.0;
};

inline void run_classify(const classify_cli_options& o, const option_registry& reg) {
  if (o.embedding.empty()) throw usage_error("classify: --embedding is required");
  if (o.common.input.empty()) throw usage_error("classify: --input is required");
  if (o.common.vars.empty()) throw usage_error("classify: --vars is required");
  const fs::path out = o.common.out_dir;
  run_manifest manifest("classify");
  stopwatch clock;
  const auto model = load_embedding(o.embedding);
  manifest.input(o.embedding);
  const auto desc = load_descriptor(o.common.input);
  manifest.input(o.common.input);
  const auto vars = load_variables(select_member(desc, o.member), o.common.vars, &manifest);
  const auto& table = *model.table();
  if (table.arity() != vars.size())
    throw usage_error("classify: embedding has " + std::to_string(table.arity()) + " variables, --vars names " +
                      std::to_string(vars.size()));
  const auto q = quantize_variables(vars, o.R);
  std::vector<symbol_id> ids(q.front().size());
  std::vector<std::uint32_t> combo(q.size());
  for (std::size_t v = 0; v < ids.size(); ++v) {
    for (std::size_t a = 0; a < q.size(); ++a) combo[a] = q[a][v];
    const auto id = table.find(combo);
    if (!id) throw descriptor_error("classify: voxel " + std::to_string(v) + " has a level combination the embedding never saw (check --R and --vars)");
    ids[v] = *id;
  }
  const symbol_volume sv(q.front().dims(), std::move(ids), model.table());

  classify_options co;
  co.eps = o.eps;
  co.min_pts = o.min_pts;
  co.metric = parse_metric(o.metric);
  co.raw_space = o.raw;
  if (o.min_voxels >= 0) co.min_voxels = static_cast<std::uint64_t>(o.min_voxels);
  auto features = classify_features(model, sv, co);
  project_features(features, {o.seed, o.tsne_iterations, o.perplexity, 500});

  fs::create_directories(out);
  const fs::path raw = out / "labels.raw", legend = out / "labels.json", png = out / "features.png";
  export_label_volume(features, sv, raw, legend);
  write_png(png, render_feature_scatter(features));
  for (const auto& p : {raw, legend, png}) manifest.output(p);
  std::size_t kept = 0;
  for (const auto& f : features.features) kept += !f.filtered;
  manifest.note("features", {{"total", features.features.size()}, {"unfiltered", kept}, {"noise_voxels", features.noise_voxels}});
  manifest.timing("total", clock.seconds());
  manifest.write(out, reg.options_json(), json::object(), o.seed);
}

// ---------------------------------------------------------------------- associate

struct associate_options {
  common_options common;
  std::string value_range = "0.7,1";
  bool project = false;
  bool export_predictions = false;
  std::string scoring = "as_printed";
  std::uint64_t tsne_seed = 1;
  double perplexity = 5.0;
};

struct member_list {
  std::vector<std::string> labels;
  std::vector<const volume_descriptor*> descriptors;
};

inline member_list members_of(const volume_descriptor& d) {
  member_list m;
  for (const auto& c : d.time_steps) {
    m.labels.push_back(c.time_step ? "t=" + format_number(*c.time_step) : std::to_string(m.labels.size()));
    m.descriptors.push_back(&c);
  }
  for (const auto& [label, c] : d.ensemble) {
    m.labels.push_back(label);
    m.descriptors.push_back(&c);
  }
  return m;
}

// Trains all members; with several threads members train concurrently, each single-threaded.
inline void train_members(volume_collection& c, const train_config& cfg, int threads) {
  c.models.assign(c.size(), std::nullopt);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t m; (m = next.fetch_add(1)) < c.size();) {
      try {
        train_config member = cfg;
        member.threads = 1;
        member.seed = member_seed(cfg.seed, m);
        c.models[m] = train(c.volumes[m], member).model;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min<int>(threads, static_cast<int>(c.size())); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline void write_u32_raw(const fs::path& path, std::span<const symbol_id> ids) {
  std::vector<unsigned char> bytes(ids.size() * 4);
  const bool swap = detail::needs_swap(byte_order::little);
  for (std::size_t i = 0; i < ids.size(); ++i) detail::store_scalar(bytes.data() + 4 * i, ids[i], swap);
  write_bytes(path, bytes);
}

inline void run_associate(associate_options& o, train_config& cfg, const option_registry& reg) {
  auto& c = o.common;
  if (c.input.empty()) throw usage_error("associate: --input is required");
  if (c.vars.empty()) throw usage_error("associate: --vars is required");
  const auto [lo, hi] = parse_value_range(o.value_range);
  const int threads = c.deterministic ? 1 : cfg.threads;
  cfg.validate();
  transfer_options topt;
  topt.context_window = cfg.context_window;
  topt.threads = threads;
  topt.scoring = o.scoring == "swapped" ? prediction_scoring::swapped : prediction_scoring::as_printed;

  const fs::path out = c.out_dir;
  run_manifest manifest("associate");
  stopwatch total;
  const auto desc = load_descriptor(c.input);
  manifest.input(c.input);
  const auto top = members_of(desc);
  if (top.descriptors.empty()) throw descriptor_error("associate: descriptor has no time_steps or ensemble members");

  // A time series whose steps are ensembles yields one matrix per step.
  std::vector<std::pair<std::string, member_list>> groups;
  bool nested = true;
  for (const auto* d : top.descriptors) nested = nested && !members_of(*d).descriptors.empty();
  if (nested) {
    for (std::size_t i = 0; i < top.descriptors.size(); ++i) groups.emplace_back(top.labels[i], members_of(*top.descriptors[i]));
  } else {
    groups.emplace_back("", top);
  }

  fs::create_directories(out);
  std::vector<square_matrix> matrices;
  json summary = json::array();
  double train_seconds = 0.0, predict_seconds = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& [group_label, members] = groups[g];
    std::vector<std::vector<volume>> data;
    for (const auto* d : members.descriptors) data.push_back(load_variables(*d, c.vars, &manifest));
    auto coll = make_collection(data, cfg.quantization, members.labels);
    stopwatch tc;
    train_config group_cfg = cfg;
    group_cfg.seed = groups.size() > 1 ? member_seed(cfg.seed, 1000 + g) : cfg.seed;
    train_members(coll, group_cfg, threads);
    train_seconds += tc.seconds();
    stopwatch pc;
    const auto assoc = association_matrix(coll, topt);
    predict_seconds += pc.seconds();

    const std::string suffix = groups.size() > 1 ? "_" + std::to_string(g) : "";
    const fs::path csv = out / ("association" + suffix + ".csv"), png = out / ("association" + suffix + ".png");
    write_text_atomic(csv, matrix_csv(assoc, coll.labels));
    const std::size_t cell = std::max<std::size_t>(1, 256 / std::max<std::size_t>(1, assoc.size()));
    write_heatmap(png, assoc, {lo, hi, cell});
    manifest.output(csv);
    manifest.output(png);
    summary.push_back({{"group", group_label}, {"members", coll.labels}, {"symbols", coll.table->size()}});

    if (o.export_predictions) {
      for (std::size_t i = 0; i < coll.size(); ++i)
        for (std::size_t j = 0; j < coll.size(); ++j) {
          const auto pred = transfer_predict(*coll.models[j], coll.volumes[i], topt);
          const fs::path p = out / "predictions" / ("pred" + suffix + "_" + std::to_string(i) + "_" + std::to_string(j) + ".raw");
          write_u32_raw(p, pred.ids());
          manifest.output(p);
        }
    }
    const bool ensemble = !desc.ensemble.empty() || nested;
    if ((o.project || ensemble) && assoc.size() >= 2) {
      tsne_options t;
      t.seed = o.tsne_seed;
      t.perplexity = o.perplexity;
      const auto layout = ensemble_projection(assoc, t);
      json pts = json::array();
      for (std::size_t i = 0; i < layout.positions.size(); ++i)
        pts.push_back({{"label", coll.labels[i]}, {"x", layout.positions[i][0]}, {"y", layout.positions[i][1]}});
      const fs::path lj = out / ("projection" + suffix + ".json"), lp = out / ("projection" + suffix + ".png");
      write_text_atomic(lj, json{{"points", pts}, {"kl_final", layout.kl_history.empty() ? 0.0 : layout.kl_history.back()}}.dump(2) + "\n");
      write_png(lp, render_ensemble_scatter(layout, coll.labels));
      manifest.output(lj);
      manifest.output(lp);
    }
    matrices.push_back(assoc);
  }
  if (matrices.size() > 1) {
    const fs::path grid = out / "association_grid.png";
    std::size_t side = 0;
    for (const auto& m : matrices) side = std::max(side, m.size());
    write_png(grid, render_heatmap_grid(matrices, matrices.size(), {lo, hi, std::max<std::size_t>(1, 96 / side)}, 4));
    manifest.output(grid);
  }
  manifest.note("groups", summary);
  manifest.timing("train", train_seconds);
  manifest.timing("predict", predict_seconds);
  manifest.timing("total", total.seconds());
  json config;
  to_json(config, cfg);
  manifest.write(out, reg.options_json(), config, cfg.seed);
}

// --------------------------------------------------------------------------- main

/// Runs one command line. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"voxel2vec: distributed representations of scalar values in volumes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version);

  gen_options gen;
  option_registry gen_reg;
  auto* gen_cmd = app.add_subcommand("gen", "generate ABC-flow datasets");
  add_common(*gen_cmd, gen_reg, gen.common, false);
  gen_reg.add_flag(*gen_cmd, "--abc", "abc", gen.abc, "ABC-flow generator");
  gen_reg.add(*gen_cmd, "--t", "t", gen.t, "time");
  gen_reg.add(*gen_cmd, "--t-range", "t_range", gen.t_range, "time series lo:hi:stride");
  gen_reg.add(*gen_cmd, "--dims", "dims", gen.dims, "grid size: N or NXxNYxNZ");
  gen_reg.add(*gen_cmd, "--sweep", "sweep", gen.sweep, "ensemble sweep, e.g. A=-2:2:0.5,B=-2:2:0.5");
  gen_reg.add(*gen_cmd, "--A", "A", gen.A, "parameter A");
  gen_reg.add(*gen_cmd, "--B", "B", gen.B, "parameter B");
  gen_reg.add(*gen_cmd, "--C", "C", gen.C, "parameter C");
  gen_reg.add(*gen_cmd, "--variant", "variant", gen.variant, "time modulation form")
      ->check(CLI::IsMember({"faithful", "symmetric"}));
  gen_reg.add(*gen_cmd, "--dtype", "dtype", gen.dtype, "raw value type")
      ->check(CLI::IsMember({"float32", "float64", "uint8", "uint16"}));

  common_options train_common;
  train_config train_cfg;
  std::string train_member;
  option_registry train_reg;
  auto* train_cmd = app.add_subcommand("train", "train an embedding on one volume");
  add_common(*train_cmd, train_reg, train_common);
  train_reg.add(*train_cmd, "--vars", "vars", train_common.vars, "variables, comma separated")->delimiter(',');
  train_reg.add(*train_cmd, "--member", "member", train_member, "member label or index of a collection");
  add_training_flags(*train_cmd, train_reg, train_cfg);

  simmap_options sim;
  option_registry sim_reg;
  auto* sim_cmd = app.add_subcommand("simmap", "similarity map of an embedding");
  add_common(*sim_cmd, sim_reg, sim.common);
  sim_reg.add(*sim_cmd, "--value-range", "value_range", sim.value_range, "color ramp range lo,hi");
  sim_reg.add(*sim_cmd, "--cell", "cell", sim.cell, "pixels per matrix cell");

  classify_cli_options cls;
  option_registry cls_reg;
  auto* cls_cmd = app.add_subcommand("classify", "cluster symbols into voxel features");
  add_common(*cls_cmd, cls_reg, cls.common);
  cls_reg.add(*cls_cmd, "--embedding", "embedding", cls.embedding, "embedding file from train");
  cls_reg.add(*cls_cmd, "--vars", "vars", cls.common.vars, "variables, comma separated")->delimiter(',');
  cls_reg.add(*cls_cmd, "--member", "member", cls.member, "member label or index of a collection");
  cls_reg.add(*cls_cmd, "--R", "quantization", cls.R, "quantization levels used in training");
  cls_reg.add(*cls_cmd, "--eps", "eps", cls.eps, "DBSCAN radius");
  cls_reg.add(*cls_cmd, "--minpts", "min_pts", cls.min_pts, "DBSCAN core threshold");
  cls_reg.add(*cls_cmd, "--metric", "metric", cls.metric, "distance metric")
      ->check(CLI::IsMember({"cosine", "euclidean"}));
  cls_reg.add_flag(*cls_cmd, "--raw", "raw_space", cls.raw, "cluster level tuples instead of embeddings");
  cls_reg.add(*cls_cmd, "--min-voxels", "min_voxels", cls.min_voxels, "features below this are drawn gray");
  cls_reg.add(*cls_cmd, "--seed", "seed", cls.seed, "layout seed");
  cls_reg.add(*cls_cmd, "--tsne-iterations", "tsne_iterations", cls.tsne_iterations, "t-SNE iterations");
  cls_reg.add(*cls_cmd, "--perplexity", "perplexity", cls.perplexity, "t-SNE perplexity");

  associate_options asc;
  train_config asc_cfg;
  option_registry asc_reg;
  auto* asc_cmd = app.add_subcommand("associate", "association between members of a collection");
  add_common(*asc_cmd, asc_reg, asc.common);
  asc_reg.add(*asc_cmd, "--vars", "vars", asc.common.vars, "variables, comma separated")->delimiter(',');
  add_training_flags(*asc_cmd, asc_reg, asc_cfg);
  asc_reg.add(*asc_cmd, "--value-range", "value_range", asc.value_range, "heatmap range lo,hi");
  asc_reg.add_flag(*asc_cmd, "--project", "project", asc.project, "t-SNE projection of the members");
  asc_reg.add_flag(*asc_cmd, "--export-predictions", "export_predictions", asc.export_predictions,
                   "write every transfer prediction as u32 symbol grids");
  asc_reg.add(*asc_cmd, "--scoring", "scoring", asc.scoring, "prediction scoring")
      ->check(CLI::IsMember({"as_printed", "swapped"}));
  asc_reg.add(*asc_cmd, "--tsne-seed", "tsne_seed", asc.tsne_seed, "projection seed");
  asc_reg.add(*asc_cmd, "--perplexity", "perplexity", asc.perplexity, "projection perplexity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_code::ok : exit_code::usage;
  }

  try {
    if (gen_cmd->parsed()) {
      load_config(gen_reg, gen.common);
      run_gen(gen, gen_reg);
    } else if (train_cmd->parsed()) {
      load_config(train_reg, train_common);
      run_train(train_common, train_member, train_cfg, train_reg);
    } else if (sim_cmd->parsed()) {
      load_config(sim_reg, sim.common);
      run_simmap(sim, sim_reg);
    } else if (cls_cmd->parsed()) {
      load_config(cls_reg, cls.common);
      run_classify(cls, cls_reg);
    } else if (asc_cmd->parsed()) {
      load_config(asc_reg, asc.common);
      run_associate(asc, asc_cfg, asc_reg);
    }
  } catch (const usage_error& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const parameter_error& e) {
    err << "usage error: " << e.what() << '\n';
    return exit_code::usage;
  } catch (const invariant_error& e) {
    err << "internal error: " << e.what() << '\n';
    return exit_code::internal;
  } catch (const error& e) {
    err << "data error: " << e.what() << '\n';
    return exit_code::data;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return exit_code::data;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return exit_code::internal;
  }
  return exit_code::ok;
}

}  // namespace voxel2vec::cli
