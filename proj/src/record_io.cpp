#include "rrm/record_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#ifndef RRM_VERSION
#define RRM_VERSION "unknown"
#endif

namespace rrm {

namespace {

constexpr const char* kColumns[] = {
    "iteration",      "epochs",          "loss_mean",   "loss_min",         "loss_max",
    "train_accuracy", "train_clean_accuracy", "validation_accuracy", "test_accuracy",
    "gamma",          "mu",              "tv_distance", "pruned",           "pruned_precision",
    "pruned_recall"};
constexpr std::size_t kScalarColumns = std::size(kColumns);

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::nan("");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw FormatError(where + ": '" + s + "' is not a number");
  return v;
}

// JSON has no NaN; missing metrics become null.
nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::string version_string() { return RRM_VERSION; }

void write_record_csv(const RunRecord& record, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (std::size_t c = 0; c < kScalarColumns; ++c) out << (c ? "," : "") << kColumns[c];
  for (std::size_t b = 0; b < WeightHistogram::kBuckets; ++b) out << ",hist_contaminated_" << b;
  for (std::size_t b = 0; b < WeightHistogram::kBuckets; ++b) out << ",hist_clean_" << b;
  out << '\n';
  for (const auto& r : record.iterations) {
    out << r.iteration << ',' << r.epochs_completed << ',' << fmt_double(r.loss_mean) << ','
        << fmt_double(r.loss_min) << ',' << fmt_double(r.loss_max) << ','
        << fmt_double(r.train_accuracy) << ',' << fmt_double(r.train_clean_accuracy) << ','
        << fmt_double(r.validation_accuracy) << ',' << fmt_double(r.test_accuracy) << ','
        << fmt_double(r.gamma) << ',' << fmt_double(r.mu) << ',' << fmt_double(r.tv_distance)
        << ',' << r.pruned << ',' << fmt_double(r.pruned_precision) << ','
        << fmt_double(r.pruned_recall);
    for (auto n : r.histogram.contaminated) out << ',' << n;
    for (auto n : r.histogram.clean) out << ',' << n;
    out << '\n';
  }
  if (!out) throw IoError("failed while writing " + path);
}

std::vector<IterationRecord> read_record_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty record file");
  const std::size_t expected = kScalarColumns + 2 * WeightHistogram::kBuckets;

  std::vector<IterationRecord> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    const std::string where = path + ":" + std::to_string(line_no);
    if (f.size() != expected) {
      throw FormatError(where + ": expected " + std::to_string(expected) + " fields, got " +
                        std::to_string(f.size()));
    }
    IterationRecord r;
    std::size_t k = 0;
    auto next = [&] { return parse_double(f[k++], where); };
    r.iteration = static_cast<int>(next());
    r.epochs_completed = static_cast<int>(next());
    r.loss_mean = next();
    r.loss_min = next();
    r.loss_max = next();
    r.train_accuracy = next();
    r.train_clean_accuracy = next();
    r.validation_accuracy = next();
    r.test_accuracy = next();
    r.gamma = next();
    r.mu = next();
    r.tv_distance = next();
    r.pruned = static_cast<std::size_t>(next());
    r.pruned_precision = next();
    r.pruned_recall = next();
    for (auto& n : r.histogram.contaminated) n = static_cast<std::size_t>(next());
    for (auto& n : r.histogram.clean) n = static_cast<std::size_t>(next());
    rows.push_back(r);
  }
  return rows;
}

void write_weight_evolution_csv(const std::vector<IterationRecord>& iterations,
                                const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const auto labels = WeightHistogram::labels();
  out << "iteration,population,bucket,count\n";
  for (const auto& r : iterations) {
    for (std::size_t b = 0; b < WeightHistogram::kBuckets; ++b) {
      out << r.iteration << ",contaminated," << labels[b] << ',' << r.histogram.contaminated[b]
          << '\n';
    }
    for (std::size_t b = 0; b < WeightHistogram::kBuckets; ++b) {
      out << r.iteration << ",clean," << labels[b] << ',' << r.histogram.clean[b] << '\n';
    }
  }
  if (!out) throw IoError("failed while writing " + path);
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json reweight = {{"gamma", c.reweight.gamma}, {"mu", c.reweight.mu}};
  reweight["contamination_estimate"] = c.reweight.contamination_estimate
                                           ? nlohmann::json(*c.reweight.contamination_estimate)
                                           : nlohmann::json(nullptr);
  return {
      {"mode", std::string(to_string(c.mode))},
      {"loss", std::string(to_string(c.loss))},
      {"architecture",
       {{"widths", c.architecture.widths},
        {"activation", std::string(to_string(c.architecture.activation))},
        {"bias", c.architecture.bias}}},
      {"epsilon_train", c.epsilon_train},
      {"epochs_per_iteration", c.epochs_per_iteration},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"reweight", reweight},
      {"max_iterations", c.max_iterations},
      {"patience", c.patience},
      {"seed", c.seed},
      {"epsilon_test", c.epsilon_test},
  };
}

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& [e, acc] : r.epsilon_test_accuracy) {
    eps.push_back({{"epsilon", e}, {"accuracy", number_or_null(acc)}});
  }
  nlohmann::json out = {
      {"iterations", r.iterations.size()},
      {"has_validation", r.has_validation},
      {"best_validation_iteration", r.best_validation_iteration},
      {"test_at_peak_validation", number_or_null(r.test_at_peak_validation)},
      {"max_test_accuracy", number_or_null(r.max_test_accuracy)},
      {"final_test_accuracy", number_or_null(r.final_test_accuracy)},
      {"reported_test_accuracy", number_or_null(r.reported_test_accuracy())},
      {"early_stopped", r.early_stopped},
      {"epsilon_test_accuracy", eps},
  };
  if (!r.iterations.empty()) {
    const auto& last = r.iterations.back();
    out["final_pruned"] = last.pruned;
    out["final_tv_distance"] = number_or_null(last.tv_distance);
    out["final_bottom_bucket"] = {{"contaminated", last.histogram.bottom_contaminated()},
                                  {"clean", last.histogram.bottom_clean()}};
  }
  return out;
}

void write_json(const nlohmann::json& doc, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed while writing " + path);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace rrm
