#include "prefalign/cli/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <CLI11.hpp>

#include "prefalign/common/error.hpp"

namespace prefalign::cli {

namespace {

struct Binding {
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

template <class F>
auto parse_or_throw(const std::string& key, const std::string& v, F f) {
  try {
    std::size_t used = 0;
    auto out = f(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ValidationError("config " + key + ": cannot parse \"" + v + "\"");
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<std::string> split_list(std::string v) {
  if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(v);
  while (std::getline(in, cur, ',')) {
    const auto a = cur.find_first_not_of(" \t"), b = cur.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(cur.substr(a, b - a + 1));
  }
  return out;
}

class Registry {
 public:
  std::map<std::string, Binding> map;

  void add(const std::string& key, int& x) {
    map[key] = {[&x] { return std::to_string(x); },
                [&x, key](const std::string& v) {
                  x = parse_or_throw(key, v, [](const std::string& s, std::size_t* u) { return std::stoi(s, u); });
                }};
  }
  void add(const std::string& key, double& x) {
    map[key] = {[&x] { return fmt(x); },
                [&x, key](const std::string& v) {
                  x = parse_or_throw(key, v, [](const std::string& s, std::size_t* u) { return std::stod(s, u); });
                }};
  }
  void add(const std::string& key, std::uint64_t& x) {
    map[key] = {[&x] { return std::to_string(x); },
                [&x, key](const std::string& v) {
                  if (!v.empty() && v[0] == '-') throw ValidationError("config " + key + ": must be non-negative");
                  x = parse_or_throw(key, v, [](const std::string& s, std::size_t* u) { return std::stoull(s, u); });
                }};
  }
  void add(const std::string& key, bool& x) {
    map[key] = {[&x] { return std::string(x ? "true" : "false"); },
                [&x, key](const std::string& v) {
                  if (v == "true" || v == "1") x = true;
                  else if (v == "false" || v == "0") x = false;
                  else throw ValidationError("config " + key + ": expected true or false, got \"" + v + "\"");
                }};
  }
  void add(const std::string& key, std::string& x) {
    map[key] = {[&x] { return x; }, [&x](const std::string& v) { x = v; }};
  }
  void add(const std::string& key, std::filesystem::path& x) {
    map[key] = {[&x] { return x.string(); }, [&x](const std::string& v) { x = v; }};
  }
  void add(const std::string& key, std::vector<int>& x) {
    map[key] = {[&x] {
                  std::string s;
                  for (std::size_t i = 0; i < x.size(); ++i) s += (i ? "," : "") + std::to_string(x[i]);
                  return s;
                },
                [&x, key](const std::string& v) {
                  std::vector<int> out;
                  for (const auto& p : split_list(v)) {
                    out.push_back(parse_or_throw(key, p, [](const std::string& s, std::size_t* u) { return std::stoi(s, u); }));
                  }
                  x = std::move(out);
                }};
  }
  void add(const std::string& key, std::vector<double>& x) {
    map[key] = {[&x] {
                  std::string s;
                  for (std::size_t i = 0; i < x.size(); ++i) s += (i ? "," : "") + fmt(x[i]);
                  return s;
                },
                [&x, key](const std::string& v) {
                  std::vector<double> out;
                  for (const auto& p : split_list(v)) {
                    out.push_back(parse_or_throw(key, p, [](const std::string& s, std::size_t* u) { return std::stod(s, u); }));
                  }
                  x = std::move(out);
                }};
  }

  void add_train(const std::string& sec, nn::TrainConfig& t) {
    add(sec + ".epochs", t.epochs);
    add(sec + ".batch_size", t.batch_size);
    add(sec + ".learning_rate", t.learning_rate);
    add(sec + ".beta1", t.beta1);
    add(sec + ".beta2", t.beta2);
    add(sec + ".weight_decay", t.weight_decay);
    add(sec + ".grad_clip", t.grad_clip);
  }
};

Registry registry(RunConfig& c) {
  Registry r;
  r.add("seed", c.seed);
  r.add("paths.run_dir", c.run_dir);
  r.add("paths.corpus", c.corpus);
  r.add("paths.bench_dir", c.bench_dir);
  r.add("toy.reviews", c.toy_reviews);

  r.add("curate.word_cap", c.curation.word_cap);
  r.add("curate.quality_threshold", c.curation.quality_threshold);
  r.add("curate.n_neg_train", c.curation.n_neg_train);
  r.add("curate.n_pos_train", c.curation.n_pos_train);
  r.add("curate.n_neg_val", c.curation.n_neg_val);
  r.add("curate.n_pos_val", c.curation.n_pos_val);
  r.add("curate.n_neg_test", c.curation.n_neg_test);
  r.add("curate.n_pos_test", c.curation.n_pos_test);
  r.add("curate.strict", c.curation.strict);

  r.add("annotator.mock", c.annotator.mock);
  r.add("annotator.endpoint", c.annotator.endpoint);
  r.add("annotator.timeout_s", c.annotator.timeout_s);
  r.add("annotator.retries", c.annotator.retries);
  r.add("annotator.backoff_ms", c.annotator.backoff_ms);
  r.add("annotator.max_attempts", c.annotator.max_attempts);

  r.add("model.d_model", c.model.d_model);
  r.add("model.n_heads", c.model.n_heads);
  r.add("model.n_layers", c.model.n_layers);
  r.add("model.d_ff", c.model.d_ff);
  r.add("model.max_seq_len", c.model.max_seq_len);

  r.add("cvae_model.d_model", c.cvae_model.d_model);
  r.add("cvae_model.n_heads", c.cvae_model.n_heads);
  r.add("cvae_model.n_layers", c.cvae_model.n_layers);
  r.add("cvae_model.d_ff", c.cvae_model.d_ff);
  r.add("cvae_model.latent_dim", c.cvae_model.latent_dim);
  r.add("cvae_model.max_seq_len", c.cvae_model.max_seq_len);

  r.add_train("sft", c.sft);
  r.add_train("cvae", c.cvae_train);

  r.add("pref.beta", c.pref.beta);
  r.add("pref.lambda", c.pref.lambda);
  r.add("pref.epochs", c.pref.epochs);
  r.add("pref.batch_size", c.pref.batch_size);
  r.add("pref.learning_rate", c.pref.learning_rate);
  r.add("pref.weight_decay", c.pref.weight_decay);
  r.add("pref.grad_clip", c.pref.grad_clip);
  r.add("pref.samples_per_prompt", c.pref.samples_per_prompt);
  r.add("pref.max_sample_len", c.pref.max_sample_len);
  r.add("pref.temperature", c.pref.temperature);
  r.add("pref.closed_form_grad", c.pref.closed_form_grad);
  r.add("pref.curriculum", c.pref.curriculum);
  r.add("pref.raw_prefdist", c.pref.raw_prefdist);
  r.add("pref.baseline", c.pref.baseline);
  r.add("pref.checkpoint_every", c.pref.checkpoint_every);

  r.add("eval.embedding", c.eval.embedding);
  r.add("eval.embedding_dim", c.eval.embedding_dim);
  r.add("eval.embedding_index", c.eval.embedding_index);
  r.add("eval.embedding_data", c.eval.embedding_data);
  r.add("eval.baseline", c.eval.baseline);
  r.add("eval.max_new_tokens", c.eval.max_new_tokens);
  r.add("eval.greedy", c.eval.greedy);
  r.add("eval.temperature", c.eval.temperature);
  r.add("eval.bootstrap_resamples", c.eval.bootstrap_resamples);

  r.add("theorybench.n_contexts", c.bench.n_contexts);
  r.add("theorybench.n_actions", c.bench.n_actions);
  r.add("theorybench.max_reward", c.bench.max_reward);
  r.add("theorybench.sample_sizes", c.bench.sample_sizes);
  r.add("theorybench.seeds", c.bench.seeds);
  r.add("theorybench.base_seed", c.bench.base_seed);
  r.add("theorybench.betas", c.bench.betas);
  r.add("theorybench.lambdas", c.bench.lambdas);
  r.add("theorybench.optimal_mass", c.bench.optimal_mass);
  r.add("theorybench.dirichlet_alpha", c.bench.dirichlet_alpha);
  r.add("theorybench.delta", c.bench.delta);
  r.add("theorybench.bootstrap_resamples", c.bench.bootstrap_resamples);
  return r;
}

}  // namespace

RunConfig::RunConfig() {
  model.max_seq_len = 640;
  cvae_model.max_seq_len = 640;
  cvae_train.epochs = 10;
  cvae_train.learning_rate = 1e-3;
}

std::filesystem::path RunConfig::corpus_path() const { return corpus.empty() ? run_dir / "reviews.jsonl" : corpus; }

void RunConfig::set(const std::string& key, const std::string& value) {
  auto reg = registry(*this);
  auto it = reg.map.find(key);
  if (it == reg.map.end()) throw ValidationError("config: unknown key \"" + key + "\"");
  it->second.set(value);
}

std::map<std::string, std::string> RunConfig::values() const {
  auto reg = registry(const_cast<RunConfig&>(*this));
  std::map<std::string, std::string> out;
  for (const auto& [k, b] : reg.map) out[k] = b.get();
  return out;
}

void RunConfig::validate() const {
  curation.validate();
  model.validate();
  cvae_model.validate();
  sft.validate();
  cvae_train.validate();
  pref.validate();
  bench.validate();
  if (toy_reviews < 1) throw ValidationError("toy.reviews must be positive");
  if (!annotator.mock && annotator.endpoint.empty()) {
    throw ValidationError("annotator.endpoint is required unless annotator.mock = true");
  }
  if (annotator.max_attempts < 1) throw ValidationError("annotator.max_attempts must be >= 1");
  if (eval.embedding != "hash" && eval.embedding != "lm" && eval.embedding != "file") {
    throw ValidationError("eval.embedding must be hash, lm or file");
  }
  if (eval.embedding == "file" && (eval.embedding_index.empty() || eval.embedding_data.empty())) {
    throw ValidationError("eval.embedding = file needs eval.embedding_index and eval.embedding_data");
  }
  if (!(eval.baseline >= 0.0 && eval.baseline < 1.0)) throw ValidationError("eval.baseline must be in [0, 1)");
  if (eval.max_new_tokens < 1 || eval.embedding_dim < 1) throw ValidationError("eval sizes must be positive");
  if (!(eval.temperature > 0.0)) throw ValidationError("eval.temperature must be positive");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values()) j[k] = v;
  return j;
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  for (const auto& it : items) {
    if (it.name == "++" || it.name == "--") continue;  // section markers
    std::string value;
    for (std::size_t i = 0; i < it.inputs.size(); ++i) value += (i ? "," : "") + it.inputs[i];
    cfg.set(it.fullname(), value);
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, ss.str());
  return cfg;
}

}  // namespace prefalign::cli
