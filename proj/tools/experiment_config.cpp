#include "experiment_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "rrm/error.hpp"
#include "rrm/record_io.hpp"

namespace rrm::cli {

namespace {

using nlohmann::json;

// Walks one JSON object, rejecting keys that were never asked for.
class Section {
 public:
  Section(const json& doc, std::string path, std::set<std::string> allowed)
      : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw InvalidInput(where() + " must be an object");
    for (const auto& [key, value] : doc_.items()) {
      if (!allowed.count(key)) throw InvalidInput("unknown key " + where(key));
    }
  }

  bool has(const std::string& key) const { return doc_.contains(key) && !doc_.at(key).is_null(); }

  const json& at(const std::string& key) const { return doc_.at(key); }

  std::string where(const std::string& key = "") const {
    const std::string base = path_.empty() ? "" : path_;
    if (key.empty()) return base.empty() ? "config" : "'" + base + "'";
    return "'" + (base.empty() ? key : base + "." + key) + "'";
  }

  template <typename T>
  void get(const std::string& key, T& out) const {
    if (!has(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InvalidInput(where(key) + " has the wrong type");
    }
  }

  template <typename T>
  void require(const std::string& key, T& out) const {
    if (!has(key)) throw InvalidInput("missing key " + where(key));
    get(key, out);
  }

  Section child(const std::string& key, std::set<std::string> allowed) const {
    return Section(doc_.at(key), path_.empty() ? key : path_ + "." + key, std::move(allowed));
  }

 private:
  const json& doc_;
  std::string path_;
};

void check_range(bool ok, const Section& s, const std::string& key, const std::string& rule) {
  if (!ok) throw InvalidInput(s.where(key) + " must be " + rule);
}

void parse_data(const Section& root, ExperimentConfig& cfg) {
  const Section d = root.child("data", {"source", "idx", "blobs", "classes"});
  std::string source = "blobs";
  d.require("source", source);
  if (source == "idx") {
    cfg.data.kind = SourceKind::kIdx;
    if (!d.has("idx")) throw InvalidInput("missing key " + d.where("idx"));
    const Section s =
        d.child("idx", {"train_images", "train_labels", "test_images", "test_labels"});
    s.require("train_images", cfg.data.idx.train_images);
    s.require("train_labels", cfg.data.idx.train_labels);
    s.require("test_images", cfg.data.idx.test_images);
    s.require("test_labels", cfg.data.idx.test_labels);
  } else if (source == "blobs") {
    cfg.data.kind = SourceKind::kBlobs;
    if (d.has("blobs")) {
      const Section s = d.child("blobs", {"num_classes", "samples_per_class",
                                          "test_samples_per_class", "input_dim", "separation",
                                          "seed"});
      auto& b = cfg.data.blobs;
      s.get("num_classes", b.num_classes);
      s.get("samples_per_class", b.samples_per_class);
      s.get("test_samples_per_class", b.test_samples_per_class);
      s.get("input_dim", b.input_dim);
      s.get("separation", b.separation);
      s.get("seed", b.seed);
      check_range(b.num_classes >= 2, s, "num_classes", ">= 2");
      check_range(b.samples_per_class > 0, s, "samples_per_class", "> 0");
      check_range(b.test_samples_per_class > 0, s, "test_samples_per_class", "> 0");
      check_range(b.input_dim > 0, s, "input_dim", "> 0");
      check_range(b.separation > 0, s, "separation", "> 0");
    }
  } else {
    throw InvalidInput(d.where("source") + " must be \"idx\" or \"blobs\"");
  }
  d.get("classes", cfg.data.classes);
}

void parse_contamination(const Section& root, ExperimentConfig& cfg) {
  if (!root.has("contamination")) return;
  const Section c = root.child("contamination", {"mode", "rate", "kernel_path", "seed"});
  std::string mode = "ncar";
  c.get("mode", mode);
  if (mode == "ncar") {
    cfg.contamination.mode = ContaminationMode::kNcar;
  } else if (mode == "kernel") {
    cfg.contamination.mode = ContaminationMode::kKernel;
  } else {
    throw InvalidInput(c.where("mode") + " must be \"ncar\" or \"kernel\"");
  }
  c.get("rate", cfg.contamination.rate);
  c.get("kernel_path", cfg.contamination.kernel_path);
  c.get("seed", cfg.contamination.seed);
  check_range(cfg.contamination.rate >= 0 && cfg.contamination.rate <= 1, c, "rate", "in [0, 1]");
}

void parse_split(const Section& root, ExperimentConfig& cfg) {
  if (!root.has("split")) return;
  const Section s = root.child("split", {"train", "validation", "seed"});
  s.get("train", cfg.train_fraction);
  s.get("validation", cfg.validation_fraction);
  s.get("seed", cfg.split_seed);
  check_range(cfg.train_fraction > 0 && cfg.train_fraction <= 1, s, "train", "in (0, 1]");
  check_range(cfg.validation_fraction >= 0 && cfg.validation_fraction < 1, s, "validation",
              "in [0, 1)");
  if (std::abs(cfg.train_fraction + cfg.validation_fraction - 1.0) > 1e-9) {
    throw InvalidInput("'split.train' + 'split.validation' must equal 1");
  }
}

void parse_model(const Section& root, ExperimentConfig& cfg) {
  if (!root.has("model")) return;
  const Section m = root.child("model", {"hidden", "activation", "bias"});
  m.get("hidden", cfg.hidden);
  for (std::size_t w : cfg.hidden) check_range(w > 0, m, "hidden", "a list of positive widths");
  std::string act(to_string(cfg.train.architecture.activation));
  m.get("activation", act);
  try {
    cfg.train.architecture.activation = parse_activation(act);
  } catch (const InvalidInput& e) {
    throw InvalidInput(m.where("activation") + ": " + e.what());
  }
  m.get("bias", cfg.train.architecture.bias);
}

void parse_train(const Section& root, ExperimentConfig& cfg) {
  if (!root.has("train")) return;
  const Section t = root.child(
      "train", {"mode", "loss", "epsilon_train", "epochs_per_iteration", "batch_size",
                "learning_rate", "gamma", "mu", "contamination_estimate", "max_iterations",
                "patience", "epsilon_test"});
  TrainConfig& tc = cfg.train;
  std::string mode(to_string(tc.mode));
  std::string loss(to_string(tc.loss));
  t.get("mode", mode);
  t.get("loss", loss);
  try {
    tc.mode = parse_train_mode(mode);
    tc.loss = parse_loss_kind(loss);
  } catch (const InvalidInput& e) {
    throw InvalidInput(t.where() + ": " + e.what());
  }
  t.get("epsilon_train", tc.epsilon_train);
  t.get("epochs_per_iteration", tc.epochs_per_iteration);
  t.get("batch_size", tc.batch_size);
  t.get("learning_rate", tc.learning_rate);
  t.get("gamma", tc.reweight.gamma);
  t.get("mu", tc.reweight.mu);
  if (t.has("contamination_estimate")) {
    double est = 0.0;
    t.get("contamination_estimate", est);
    tc.reweight.contamination_estimate = est;
  }
  t.get("max_iterations", tc.max_iterations);
  t.get("patience", tc.patience);
  t.get("epsilon_test", tc.epsilon_test);
}

}  // namespace

std::string_view to_string(ContaminationMode mode) noexcept {
  return mode == ContaminationMode::kNcar ? "ncar" : "kernel";
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  const Section root(doc, "",
                     {"schema_version", "data", "contamination", "split", "model", "train",
                      "seeds", "workers", "output_dir", "run_name"});
  root.require("schema_version", cfg.schema_version);
  if (cfg.schema_version != kSchemaVersion) {
    throw InvalidInput("unsupported schema_version " + std::to_string(cfg.schema_version) +
                       " (this build reads version " + std::to_string(kSchemaVersion) + ")");
  }
  if (!root.has("data")) throw InvalidInput("missing key 'data'");
  parse_data(root, cfg);
  parse_contamination(root, cfg);
  parse_split(root, cfg);
  parse_model(root, cfg);
  parse_train(root, cfg);
  root.get("seeds", cfg.seeds);
  if (cfg.seeds.empty()) throw InvalidInput("'seeds' must not be empty");
  root.get("workers", cfg.workers);
  check_range(cfg.workers >= 1, root, "workers", ">= 1");
  root.get("output_dir", cfg.output_dir);
  root.get("run_name", cfg.run_name);
  if (cfg.run_name.find('/') != std::string::npos) {
    throw InvalidInput("'run_name' must not contain '/'");
  }

  // Widths other than the hidden ones depend on the data; validate the rest now.
  TrainConfig probe = cfg.train;
  probe.architecture.widths = {1};
  probe.architecture.widths.insert(probe.architecture.widths.end(), cfg.hidden.begin(),
                                   cfg.hidden.end());
  probe.architecture.widths.push_back(2);
  probe.validate();
  cfg.source = doc;
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_json(path));
}

json to_json(const ExperimentConfig& c) {
  json data;
  if (c.data.kind == SourceKind::kIdx) {
    data = {{"source", "idx"},
            {"idx",
             {{"train_images", c.data.idx.train_images},
              {"train_labels", c.data.idx.train_labels},
              {"test_images", c.data.idx.test_images},
              {"test_labels", c.data.idx.test_labels}}}};
  } else {
    const auto& b = c.data.blobs;
    data = {{"source", "blobs"},
            {"blobs",
             {{"num_classes", b.num_classes},
              {"samples_per_class", b.samples_per_class},
              {"test_samples_per_class", b.test_samples_per_class},
              {"input_dim", b.input_dim},
              {"separation", b.separation},
              {"seed", b.seed}}}};
  }
  if (!c.data.classes.empty()) data["classes"] = c.data.classes;

  const TrainConfig& t = c.train;
  json train = {{"mode", std::string(to_string(t.mode))},
                {"loss", std::string(to_string(t.loss))},
                {"epsilon_train", t.epsilon_train},
                {"epochs_per_iteration", t.epochs_per_iteration},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"gamma", t.reweight.gamma},
                {"mu", t.reweight.mu},
                {"max_iterations", t.max_iterations},
                {"patience", t.patience},
                {"epsilon_test", t.epsilon_test}};
  if (t.reweight.contamination_estimate) {
    train["contamination_estimate"] = *t.reweight.contamination_estimate;
  }
  json contamination = {{"mode", std::string(to_string(c.contamination.mode))},
                        {"rate", c.contamination.rate},
                        {"seed", c.contamination.seed}};
  if (!c.contamination.kernel_path.empty()) {
    contamination["kernel_path"] = c.contamination.kernel_path;
  }
  json out = {
      {"schema_version", c.schema_version},
      {"data", data},
      {"contamination", contamination},
      {"split",
       {{"train", c.train_fraction}, {"validation", c.validation_fraction}, {"seed", c.split_seed}}},
      {"model",
       {{"hidden", c.hidden},
        {"activation", std::string(to_string(t.architecture.activation))},
        {"bias", t.architecture.bias}}},
      {"train", train},
      {"seeds", c.seeds},
      {"workers", c.workers},
      {"output_dir", c.output_dir},
  };
  if (!c.run_name.empty()) out["run_name"] = c.run_name;
  return out;
}

std::string resolve_output_dir(const std::string& dir) {
  const std::filesystem::path p(dir);
  const char* root = std::getenv("RRM_OUTPUT_ROOT");
  if (p.is_absolute() || root == nullptr || *root == '\0') return p.string();
  return (std::filesystem::path(root) / p).string();
}

std::string run_directory(const ExperimentConfig& config) {
  const std::string name =
      config.run_name.empty() ? std::string(to_string(config.train.mode)) : config.run_name;
  return (std::filesystem::path(resolve_output_dir(config.output_dir)) / name).string();
}

}  // namespace rrm::cli
