#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "rrm/data.hpp"
#include "rrm/error.hpp"
#include "rrm/record_io.hpp"
#include "rrm/verify.hpp"

namespace rrm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kBlobTestSeedOffset = 0x5BD1E995ULL;

std::string percent(double v) {
  if (std::isnan(v)) return "-";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

std::string data_dir(const ExperimentConfig& config) {
  return (fs::path(resolve_output_dir(config.output_dir)) / "data").string();
}

Dataset load_idx_dataset(const std::string& images, const std::string& labels,
                         const std::vector<int>& classes) {
  IdxData raw = load_idx(images, labels);
  const int k = raw.labels.empty() ? 1 : *std::max_element(raw.labels.begin(), raw.labels.end()) + 1;
  Dataset d = Dataset::clean(std::move(raw.features), std::move(raw.labels), std::max(k, 10));
  return classes.empty() ? d : subset_classes(d, classes);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json stats_json(const std::vector<double>& values) {
  const MeanStd s = mean_std(values);
  return {{"mean", number_or_null(s.mean)}, {"std", number_or_null(s.std)}, {"values", values}};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

SeedOutcome run_seed(const ExperimentConfig& config, const Dataset& pool, const Dataset& test,
                     std::uint64_t seed, const fs::path& seed_dir) {
  SeedOutcome out;
  out.seed = seed;
  ensure_dir(seed_dir);

  Splits splits = split(pool, {config.train_fraction, config.validation_fraction, 0.0},
                        config.split_seed);
  splits.test = test;

  TrainConfig tc = config.train;
  tc.seed = seed;
  tc.architecture.widths = {pool.dim()};
  tc.architecture.widths.insert(tc.architecture.widths.end(), config.hidden.begin(),
                                config.hidden.end());
  tc.architecture.widths.push_back(static_cast<std::size_t>(pool.num_classes));

  json summary = {{"version", version_string()},
                  {"config", to_json(config)},
                  {"seed", seed},
                  {"train_config", to_json(tc)},
                  {"data",
                   {{"train_size", splits.train.size()},
                    {"validation_size", splits.validation.size()},
                    {"test_size", splits.test.size()},
                    {"contaminated_in_train", splits.train.contaminated.size()},
                    {"contamination_rate", pool.contamination_rate},
                    {"contamination_seed", pool.contamination_seed}}}};
  try {
    RunResult result = run(splits, tc);
    save_checkpoint(result.best_model, (seed_dir / "checkpoint.bin").string());
    write_record_csv(result.record, (seed_dir / "record.csv").string());
    summary["result"] = to_json(result.record);
    write_json(summary, (seed_dir / "summary.json").string());
    out.record = std::move(result.record);
  } catch (const RunFailure& e) {
    write_record_csv(e.partial(), (seed_dir / "record.csv").string());
    summary["result"] = to_json(e.partial());
    summary["error"] = e.what();
    write_json(summary, (seed_dir / "summary.json").string());
    throw;
  }
  return out;
}

json aggregate_json(const ExperimentConfig& config, const std::vector<SeedOutcome>& seeds,
                    double rate) {
  std::vector<double> reported, peak;
  std::map<double, std::vector<double>> eps;
  json failed = json::array();
  for (const auto& s : seeds) {
    if (s.exit_code != kExitOk) {
      failed.push_back({{"seed", s.seed}, {"error", s.error}});
      continue;
    }
    reported.push_back(s.record.reported_test_accuracy());
    peak.push_back(s.record.max_test_accuracy);
    for (const auto& [e, acc] : s.record.epsilon_test_accuracy) eps[e].push_back(acc);
  }
  json eps_json = json::array();
  for (const auto& [e, values] : eps) {
    json row = stats_json(values);
    row["epsilon"] = e;
    eps_json.push_back(row);
  }
  return {{"version", version_string()},
          {"config", to_json(config)},
          {"mode", std::string(to_string(config.train.mode))},
          {"loss", std::string(to_string(config.train.loss))},
          {"epsilon_train", config.train.epsilon_train},
          {"contamination_rate", rate},
          {"seeds_completed", reported.size()},
          {"seeds_failed", failed},
          {"test_accuracy", stats_json(reported)},
          {"max_test_accuracy", stats_json(peak)},
          {"epsilon_test_accuracy", eps_json}};
}

}  // namespace

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) return {std::nan(""), std::nan("")};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const InvalidInput*>(&e) || dynamic_cast<const FormatError*>(&e)) {
    return kExitSchema;
  }
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const NumericFailure*>(&e)) return kExitNumeric;
  return kExitOther;
}

std::string train_cache_path(const ExperimentConfig& config) {
  return (fs::path(data_dir(config)) / "train_pool.rrmds").string();
}

std::string test_cache_path(const ExperimentConfig& config) {
  return (fs::path(data_dir(config)) / "test.rrmds").string();
}

InjectResult cmd_inject(const ExperimentConfig& config, std::ostream& log) {
  Dataset train, test;
  if (config.data.kind == SourceKind::kIdx) {
    const auto& p = config.data.idx;
    train = load_idx_dataset(p.train_images, p.train_labels, config.data.classes);
    test = load_idx_dataset(p.test_images, p.test_labels, config.data.classes);
  } else {
    const auto& b = config.data.blobs;
    train = make_synthetic_blobs(b.num_classes, b.samples_per_class, b.input_dim, b.separation,
                                 b.seed);
    test = make_synthetic_blobs(b.num_classes, b.test_samples_per_class, b.input_dim,
                                b.separation, b.seed + kBlobTestSeedOffset);
    if (!config.data.classes.empty()) {
      train = subset_classes(train, config.data.classes);
      test = subset_classes(test, config.data.classes);
    }
  }

  const auto& c = config.contamination;
  Contamination injected;
  if (c.mode == ContaminationMode::kNcar) {
    injected = inject_ncar(train.clean_labels, c.rate, train.num_classes, c.seed);
  } else {
    const ContaminationKernel kernel = c.kernel_path.empty()
                                           ? ContaminationKernel::mnist10()
                                           : ContaminationKernel::load(c.kernel_path);
    if (kernel.num_classes() != static_cast<std::size_t>(train.num_classes)) {
      throw InvalidInput("kernel has " + std::to_string(kernel.num_classes()) +
                         " classes but the data has " + std::to_string(train.num_classes));
    }
    injected = inject_kernel(train.clean_labels, c.rate, kernel, c.seed);
  }
  train = apply_contamination(std::move(train), std::move(injected), c.rate, c.seed);

  ensure_dir(data_dir(config));
  write_cache(train, train_cache_path(config));
  write_cache(test, test_cache_path(config));

  InjectResult r{train.size(), train.contaminated.size(), c.rate, c.seed};
  log << "injected " << to_string(c.mode) << " contamination: |C| = " << r.contaminated
      << " of N = " << r.samples << " (rate " << r.rate << ", seed " << r.seed << ")\n"
      << "wrote " << train_cache_path(config) << " and " << test_cache_path(config) << "\n";
  return r;
}

int TrainResult::exit_code() const {
  for (const auto& s : seeds) {
    if (s.exit_code != kExitOk) return s.exit_code;
  }
  return kExitOk;
}

TrainResult cmd_train(const ExperimentConfig& config, std::ostream& log) {
  std::vector<std::string> missing;
  for (const auto& p : {train_cache_path(config), test_cache_path(config)}) {
    if (!fs::exists(p)) missing.push_back(p);
  }
  if (!missing.empty()) {
    std::string msg = "dataset cache missing (run `rrm inject` with this config first):";
    for (const auto& p : missing) msg += "\n  " + p;
    throw IoError(msg);
  }
  const Dataset pool = read_cache(train_cache_path(config));
  const Dataset test = read_cache(test_cache_path(config));
  if (pool.dim() != test.dim() || pool.num_classes != test.num_classes) {
    throw FormatError("train and test caches disagree on dimension or class count");
  }

  TrainResult result;
  result.run_dir = run_directory(config);
  ensure_dir(result.run_dir);
  result.seeds.resize(config.seeds.size());

  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < config.seeds.size();) {
      const std::uint64_t seed = config.seeds[i];
      SeedOutcome& out = result.seeds[i];
      out.seed = seed;
      const fs::path dir = fs::path(result.run_dir) / ("seed_" + std::to_string(seed));
      try {
        out = run_seed(config, pool, test, seed, dir);
        std::lock_guard lock(log_mutex);
        log << "seed " << seed << ": test accuracy " << percent(out.record.reported_test_accuracy())
            << "% (max " << percent(out.record.max_test_accuracy) << "%) -> " << dir.string()
            << "\n";
      } catch (const std::exception& e) {
        out.exit_code = exit_code_for(e);
        out.error = e.what();
        std::lock_guard lock(log_mutex);
        log << "seed " << seed << ": FAILED: " << e.what() << "\n";
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers),
                                             config.seeds.size());
  std::vector<std::thread> pool_threads;
  for (std::size_t w = 1; w < workers; ++w) pool_threads.emplace_back(worker);
  worker();
  for (auto& t : pool_threads) t.join();

  result.aggregate = aggregate_json(config, result.seeds, pool.contamination_rate);
  write_json(result.aggregate, (fs::path(result.run_dir) / "aggregate.json").string());
  const auto& acc = result.aggregate["test_accuracy"];
  if (!acc["mean"].is_null()) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.2f +- %.2f", 100.0 * acc["mean"].get<double>(),
                  100.0 * acc["std"].get<double>());
    log << to_string(config.train.mode) << " aggregate over " << acc["values"].size()
        << " seed(s): " << buf << "%\n";
  }
  return result;
}

int cmd_verify(const VerifyOptions& options, std::ostream& log) {
  verify::Report report;
  if (options.replay_path) {
    const verify::Instance in = verify::instance_from_json(read_json(*options.replay_path));
    report.suites.push_back(verify::replay(in, verify::default_solver()));
  } else {
    report = verify::run_all(options.seed, verify::default_solver());
  }

  for (const auto& s : report.suites) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s %6zu instances %4zu failures  %s  (%.2fs)\n",
                  s.name.c_str(), s.instances, s.failures, s.passed() ? "PASS" : "FAIL",
                  s.seconds);
    log << buf;
  }
  if (options.report_path) write_json(report.to_json(), *options.report_path);

  const auto failed = std::find_if(report.suites.begin(), report.suites.end(),
                                   [](const verify::SuiteResult& s) { return !s.passed(); });
  if (failed == report.suites.end()) {
    log << "all suites passed\n";
    return kExitOk;
  }
  if (!failed->first_failure.is_null()) {
    write_json(failed->first_failure, options.failure_path);
    log << "first failure written to " << options.failure_path
        << " (replay with: rrm verify --replay " << options.failure_path << ")\n"
        << failed->first_failure.dump() << "\n";
  }
  return kExitVerification;
}

void cmd_report(const ReportOptions& options, std::ostream& log) {
  if (options.run_dirs.empty()) throw InvalidInput("report needs at least one run directory");

  struct Run {
    fs::path dir;
    json aggregate;
    std::vector<fs::path> seed_dirs;
  };
  std::vector<Run> runs;
  std::vector<std::string> missing;
  for (const auto& d : options.run_dirs) {
    Run run{fs::path(d), {}, {}};
    const fs::path agg = run.dir / "aggregate.json";
    if (!fs::exists(agg)) {
      missing.push_back(agg.string());
      continue;
    }
    run.aggregate = read_json(agg.string());
    for (const auto& entry : fs::directory_iterator(run.dir)) {
      if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0) {
        run.seed_dirs.push_back(entry.path());
        for (const char* f : {"record.csv", "summary.json", "checkpoint.bin"}) {
          if (!fs::exists(entry.path() / f)) missing.push_back((entry.path() / f).string());
        }
      }
    }
    std::sort(run.seed_dirs.begin(), run.seed_dirs.end());
    runs.push_back(std::move(run));
  }
  if (!missing.empty()) {
    std::string msg = "missing run artifacts:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw IoError(msg);
  }

  const fs::path out_dir(options.out_dir);
  ensure_dir(out_dir);

  // Comparison table: one row per (loss, epsilon_train), one column per
  // contamination rate, baseline first and the reweighted run in parentheses.
  using RowKey = std::pair<std::string, double>;
  std::map<RowKey, std::map<double, std::pair<std::string, std::string>>> table;
  std::set<double> rates;
  std::ofstream cmp(out_dir / "comparison.csv");
  if (!cmp) throw IoError("cannot write " + (out_dir / "comparison.csv").string());
  cmp << "run_dir,mode,loss,epsilon_train,contamination_rate,seeds,mean_test_accuracy,"
         "std_test_accuracy\n";
  for (const auto& run : runs) {
    const json& a = run.aggregate;
    const std::string mode = a.at("mode").get<std::string>();
    const std::string loss = a.at("loss").get<std::string>();
    const double eps = a.at("epsilon_train").get<double>();
    const double rate = a.at("contamination_rate").get<double>();
    const json& acc = a.at("test_accuracy");
    const double mean = acc.at("mean").is_null() ? std::nan("") : acc.at("mean").get<double>();
    const double sd = acc.at("std").is_null() ? std::nan("") : acc.at("std").get<double>();
    cmp << run.dir.string() << ',' << mode << ',' << loss << ',' << eps << ',' << rate << ','
        << acc.at("values").size() << ',' << mean << ',' << sd << '\n';
    rates.insert(rate);
    auto& cell = table[{loss, eps}][rate];
    (mode == "erm" ? cell.first : cell.second) = percent(mean);
  }

  log << "Test accuracy (%), baseline (reweighted)\n";
  log << "loss/eps_train";
  for (double r : rates) log << "\t" << percent(r) << "%";
  log << "\n";
  for (const auto& [key, cells] : table) {
    log << key.first << "/" << key.second;
    for (double r : rates) {
      const auto it = cells.find(r);
      if (it == cells.end()) {
        log << "\t-";
        continue;
      }
      const auto& [base, wrapped] = it->second;
      log << "\t" << (base.empty() ? "-" : base) << " (" << (wrapped.empty() ? "-" : wrapped)
          << ")";
    }
    log << "\n";
  }

  // Accuracy under test-time FGSM, one column per run.
  std::set<double> eps_values;
  for (const auto& run : runs) {
    for (const auto& row : run.aggregate.at("epsilon_test_accuracy")) {
      eps_values.insert(row.at("epsilon").get<double>());
    }
  }
  if (!eps_values.empty()) {
    std::ofstream eps_csv(out_dir / "epsilon_test.csv");
    if (!eps_csv) throw IoError("cannot write " + (out_dir / "epsilon_test.csv").string());
    eps_csv << "run_dir,mode,epsilon_test,mean_accuracy,std_accuracy\n";
    log << "\nAccuracy (%) under FGSM on the test set\neps_test";
    for (const auto& run : runs) {
      log << "\t" << (run.dir.parent_path().filename() / run.dir.filename()).string();
    }
    log << "\n";
    for (double e : eps_values) {
      log << e;
      for (const auto& run : runs) {
        std::string cell = "-";
        for (const auto& row : run.aggregate.at("epsilon_test_accuracy")) {
          if (row.at("epsilon").get<double>() != e) continue;
          const double m = row.at("mean").is_null() ? std::nan("") : row.at("mean").get<double>();
          const double s = row.at("std").is_null() ? std::nan("") : row.at("std").get<double>();
          cell = percent(m);
          eps_csv << run.dir.string() << ',' << run.aggregate.at("mode").get<std::string>() << ','
                  << e << ',' << m << ',' << s << '\n';
        }
        log << "\t" << cell;
      }
      log << "\n";
    }
  }

  // Weight evolution per seed.
  const fs::path evo_dir = out_dir / "weight_evolution";
  ensure_dir(evo_dir);
  std::size_t files = 0;
  for (const auto& run : runs) {
    const std::string stem = run.dir.parent_path().filename().string() + "_" +
                             run.dir.filename().string();
    for (const auto& sd : run.seed_dirs) {
      const auto rows = read_record_csv((sd / "record.csv").string());
      write_weight_evolution_csv(rows,
                                 (evo_dir / (stem + "_" + sd.filename().string() + ".csv")).string());
      ++files;
    }
  }
  log << "\nwrote " << (out_dir / "comparison.csv").string() << " and " << files
      << " weight-evolution file(s) under " << evo_dir.string() << "\n";
}

}  // namespace rrm::cli
