#include "hrf/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <vector>

#include "hrf/csv.hpp"
#include "hrf/error.hpp"
#include "hrf/forest.hpp"
#include "hrf/pipeline.hpp"
#include "hrf/rng.hpp"
#include "hrf/simulate.hpp"
#include "hrf/svg.hpp"
#include "hrf/text_cluster.hpp"

namespace fs = std::filesystem;

namespace hrf {

namespace {

struct ForestFlags {
  int trees = 0;
  int mtry = 0;
  int min_node_size = 0;
  int threads = 1;

  ForestConfig apply(ForestConfig cfg) const {
    if (trees > 0) cfg.n_trees = trees;
    cfg.mtry = mtry;
    cfg.min_node_size = min_node_size;
    cfg.threads = threads;
    return cfg;
  }
};

void add_forest_flags(CLI::App* cmd, ForestFlags& f, int default_trees) {
  f.trees = default_trees;
  cmd->add_option("--trees", f.trees, "Trees per forest")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--mtry", f.mtry, "Candidate features per split (0: floor(sqrt(p)))")->check(CLI::NonNegativeNumber);
  cmd->add_option("--min-node-size", f.min_node_size, "Minimum terminal node size (0: task default)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--threads", f.threads, "Worker threads (0: all cores)")->capture_default_str()->check(
      CLI::NonNegativeNumber);
}

const std::map<std::string, FeedMode> kFeedModes = {{"oob", FeedMode::out_of_bag}, {"in-sample", FeedMode::in_sample}};

fs::path output_dir(const std::string& flag) {
  fs::path dir = flag;
  if (dir.empty()) {
    const char* env = std::getenv(kOutputDirEnv);
    dir = env && *env ? fs::path(env) : fs::path(".");
  }
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

std::string percent(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << 100.0 * v << '%';
  return s.str();
}

// Appends "--key value" pairs from a JSON config object for every key the
// command line does not already set.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open '" + path + "'");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ValidationError("--config", e.what());
  }
  if (!cfg.is_object()) throw CLI::ValidationError("--config", "config must be a JSON object");

  std::set<std::string> given;
  for (const auto& a : args)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(0, a.find('=')));
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = "--" + key;
    for (char& c : flag)
      if (c == '_') c = '-';
    if (given.count(flag) || flag == "--config") continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
      continue;
    }
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      for (const auto& v : value) {
        if (!text.empty()) text += ',';
        text += v.is_string() ? v.get<std::string>() : v.dump();
      }
    } else {
      text = value.dump();
    }
    args.push_back(flag);
    args.push_back(text);
  }
  return args;
}

// ---------------------------------------------------------------------------

struct SimulateFlags {
  std::string scenario = "all";
  int n = 500;
  int b = 100;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
  std::string feed = "oob";
  double level = 0.9;
  std::string mtry_rule = "round";
  ForestFlags forest;
  std::string out;
};

int cmd_simulate(const SimulateFlags& f, std::ostream& out) {
  const fs::path dir = output_dir(f.out);
  std::vector<Scenario> scenarios;
  if (f.scenario == "all") scenarios = {Scenario::linear, Scenario::nonlinear, Scenario::classification};
  else scenarios = {parse_scenario(f.scenario)};

  StudyConfig study;
  study.forest = f.forest.apply(study.forest);
  study.threads = study.forest.threads;
  study.forest.threads = 1;
  study.feed = kFeedModes.at(f.feed);
  study.level = f.level;
  study.round_mtry = f.mtry_rule == "round";
  for (Scenario s : scenarios) {
    ScenarioSpec spec{s, f.n, f.b, f.noise_sd, f.seed};
    const StudyResult result = run_study(spec, study);
    const auto tables = write_tables(result, dir);
    const auto plots = plot_predictions(result, dir);
    out << to_string(s) << ": ";
    for (const ArmResult* arm : {&result.naive, &result.hier}) {
      out << arm->name;
      if (arm->confusion) {
        out << " accuracy " << percent(arm->confusion->accuracy());
      } else {
        out << " bias " << format_number(arm->report.bias, 6) << " mse " << format_number(arm->report.mse, 6);
        if (arm->report.pi_coverage) out << " coverage " << percent(*arm->report.pi_coverage);
      }
      out << (arm == &result.naive ? "; " : "\n");
    }
    for (const auto& p : tables) out << "  wrote " << p.string() << '\n';
    for (const auto& p : plots) out << "  wrote " << p.string() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ClusterFlags {
  std::string input;
  std::string column;
  std::optional<int> k;
  int k_max = 10;
  std::string mode = "soundex-jw";
  std::string linkage = "average";
  std::string out;
};

std::vector<std::string> read_labels(const std::string& path, const std::string& column) {
  const CsvTable table = read_csv_file(path);
  if (table.header.empty()) throw ParseError("label file has no header", 1);
  std::size_t col = 0;
  if (!column.empty()) {
    const auto it = std::find(table.header.begin(), table.header.end(), column);
    if (it == table.header.end()) throw SchemaError("label file has no column '" + column + "'");
    col = static_cast<std::size_t>(it - table.header.begin());
  }
  std::vector<std::string> labels;
  std::set<std::string> seen;
  long row = 1;
  for (const auto& cells : table.rows) {
    ++row;
    if (col >= cells.size()) throw ParseError("row is missing the label field", row);
    if (seen.insert(cells[col]).second) labels.push_back(cells[col]);
  }
  return labels;
}

int cmd_cluster(const ClusterFlags& f, std::ostream& out) {
  std::vector<std::string> labels = read_labels(f.input, f.column);
  if (labels.size() < 2) throw Error("clustering needs at least two distinct labels");
  const fs::path dir = output_dir(f.out);

  ClusterOptions options;
  options.mode = parse_distance_mode(f.mode);
  options.linkage = parse_linkage(f.linkage);
  options.k = f.k;
  options.k_max = f.k_max;
  if (f.k && *f.k > static_cast<int>(labels.size()))
    throw ConfigError("--k exceeds the number of distinct labels (" + std::to_string(labels.size()) + ")");
  const DistanceMatrix dm = distance_matrix(labels, options.mode);
  ClusterModel model = cluster_labels(labels, options);
  std::optional<ElbowCurve> curve = model.elbow;
  if (!curve && labels.size() >= 3) curve = elbow_k(model.tree, dm.d, f.k_max);

  {
    auto file = open_out(dir / "assignments.csv");
    file << "label,cluster,medoid\n";
    for (std::size_t i = 0; i < model.labels.size(); ++i) {
      const int c = model.assignment[i];
      const bool medoid = model.medoids[static_cast<std::size_t>(c - 1)] == static_cast<int>(i);
      file << csv_escape(model.labels[i]) << ',' << c << ',' << (medoid ? 1 : 0) << '\n';
    }
  }
  out << "k = " << model.k << (f.k ? " (forced)" : " (elbow)") << " over " << labels.size() << " labels\n";
  out << "  wrote " << (dir / "assignments.csv").string() << '\n';
  if (curve) {
    auto file = open_out(dir / "elbow.csv");
    file << "k,cost\n";
    std::vector<double> ks, cost;
    for (std::size_t i = 0; i < curve->cost.size(); ++i) {
      file << i + 1 << ',' << format_number(curve->cost[i]) << '\n';
      ks.push_back(static_cast<double>(i + 1));
      cost.push_back(curve->cost[i]);
    }
    SvgFigure fig("within-cluster medoid cost", "k", "W(k)");
    fig.x_range(0.5, static_cast<double>(ks.size()) + 0.5);
    const auto [lo, hi] = padded_range(cost);
    fig.y_range(lo, hi);
    fig.polyline(ks, cost, "#1f77b4");
    fig.points(ks, cost, "#1f77b4", 3.0);
    fig.save(dir / "elbow.svg");
    out << "  wrote " << (dir / "elbow.csv").string() << '\n';
    out << "  wrote " << (dir / "elbow.svg").string() << '\n';
  }
  plot_dendrogram(model, dir / "dendrogram.svg");
  out << "  wrote " << (dir / "dendrogram.svg").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct SynthFlags {
  int n = 20000;
  std::uint64_t seed = 0;
  double link = 0.8;
  int first_year = 2009;
  int years = 6;
  std::string out;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
  const fs::path dir = output_dir(f.out);
  const auto records = synth_generate({f.n, f.seed, f.link, f.first_year, f.years});
  write_records(dir / "records.csv", records);
  out << "generated " << records.size() << " records\n  wrote " << (dir / "records.csv").string() << '\n';
  return 0;
}

struct ModelFlags {
  std::string input;
  std::uint64_t seed = 0;
  int reason_k = 6;
  int clothing_k = 10;
  std::vector<std::string> proxies;
  std::string feed = "oob";
  ForestFlags forest;
  std::string out;
};

struct ReasonFlags : ModelFlags {
  double train_fraction = 0.8;
  bool save_model = false;
};

struct OccurrenceFlags : ModelFlags {
  double level = 0.9;
  std::string cutoff = "2014-01-01";
  std::string district;
  int race_trees = 100;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f, int default_trees) {
  cmd->add_option("--input", f.input, "Records CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Master seed")->required();
  cmd->add_option("--reason-k", f.reason_k, "Reason clusters")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--clothing-k", f.clothing_k, "Clothing clusters")->capture_default_str()->check(
      CLI::PositiveNumber);
  cmd->add_option("--proxies", f.proxies, "Race proxy columns")->delimiter(',');
  cmd->add_option("--feed", f.feed, "Bottom-layer feed")->capture_default_str()->check(
      CLI::IsMember({"oob", "in-sample"}));
  add_forest_flags(cmd, f.forest, default_trees);
  cmd->add_option("--out", f.out, "Output directory");
}

Preprocessed load_and_preprocess(const ModelFlags& f, std::ostream& out) {
  const auto records = read_records(fs::path(f.input));
  if (records.empty()) throw Error("'" + f.input + "' holds no records");
  PreprocessOptions options;
  options.reason.k = f.reason_k;
  options.clothing.k = f.clothing_k;
  Preprocessed prep = preprocess(records, options);
  out << records.size() << " records; " << prep.reason.labels.size() << " reason strings -> " << prep.reason.k
      << " clusters; " << prep.clothing.labels.size() << " clothing strings -> " << prep.clothing.k
      << " clusters\n";
  return prep;
}

ReasonConfig reason_config(const ModelFlags& f) {
  ReasonConfig cfg;
  if (!f.proxies.empty()) cfg.proxies = f.proxies;
  cfg.forest = f.forest.apply(cfg.forest);
  cfg.feed = kFeedModes.at(f.feed);
  cfg.seed = derive_seed(f.seed, "reason");
  return cfg;
}

void write_cluster_map(const fs::path& path, const ClusterModel& m, const std::string& prefix) {
  auto file = open_out(path);
  file << "label,cluster\n";
  for (std::size_t i = 0; i < m.labels.size(); ++i)
    file << csv_escape(m.labels[i]) << ',' << prefix << m.assignment[i] << '\n';
}

int cmd_reason(const ReasonFlags& f, std::ostream& out) {
  const fs::path dir = output_dir(f.out);
  const Preprocessed prep = load_and_preprocess(f, out);
  const ReasonConfig cfg = reason_config(f);
  const ReasonComparison cmp = compare_reason(prep.data, cfg, f.train_fraction);

  {
    auto file = open_out(dir / "reason_accuracy.csv");
    write_reason_table(file, cmp);
  }
  {
    auto file = open_out(dir / "reason_confusion.csv");
    write_confusion_header(file);
    write_confusion_rows(file, "hier", cmp.hier_confusion);
    write_confusion_rows(file, "naive", cmp.naive_confusion);
  }
  write_cluster_map(dir / "reason_clusters.csv", prep.reason, "R");
  write_cluster_map(dir / "clothing_clusters.csv", prep.clothing, "C");
  plot_dendrogram(prep.reason, dir / "reason_dendrogram.svg");

  const long race_splits = count_splits_on(cmp.hier.hier->top, cfg.protected_column);
  out << "hier accuracy " << percent(cmp.hier_accuracy) << ", naive accuracy " << percent(cmp.naive_accuracy)
      << " on " << cmp.n_test_hier << " test rows\n";
  out << "bottom-layer race accuracy " << percent(cmp.race_accuracy) << "; hier top-layer splits on '"
      << cfg.protected_column << "': " << race_splits << '\n';
  for (const char* name : {"reason_accuracy.csv", "reason_confusion.csv", "reason_clusters.csv",
                           "clothing_clusters.csv", "reason_dendrogram.svg"})
    out << "  wrote " << (dir / name).string() << '\n';
  if (f.save_model) {
    auto file = open_out(dir / "reason_hier_model.txt");
    save_hier(file, *cmp.hier.hier);
    out << "  wrote " << (dir / "reason_hier_model.txt").string() << '\n';
  }
  return 0;
}

int cmd_occurrence(const OccurrenceFlags& f, std::ostream& out) {
  const fs::path dir = output_dir(f.out);
  const Preprocessed prep = load_and_preprocess(f, out);
  ReasonConfig reason = reason_config(f);
  reason.forest.n_trees = f.race_trees;
  OccurrenceConfig cfg;
  cfg.forest = f.forest.apply(cfg.forest);
  cfg.level = f.level;
  cfg.cutoff = parse_date(f.cutoff);
  if (!f.district.empty()) cfg.district = f.district;
  cfg.seed = derive_seed(f.seed, "occurrence");
  const OccurrenceComparison cmp = compare_occurrence(prep, reason, cfg);

  {
    auto file = open_out(dir / "occurrence_metrics.csv");
    write_occurrence_table(file, cmp);
  }
  {
    auto file = open_out(dir / "occurrence_forecast.csv");
    write_forecast(file, cmp);
  }
  plot_forecast(cmp, dir / "occurrence_forecast.svg");

  out << cmp.n_train << " training days, " << cmp.n_test << " test days\n";
  for (const OccurrenceArm* arm : {&cmp.hier, &cmp.naive})
    out << arm->name << ": bias " << format_number(arm->report.bias, 6) << " mse "
        << format_number(arm->report.mse, 6) << " coverage " << percent(arm->report.pi_coverage.value_or(0.0))
        << '\n';
  for (const char* name : {"occurrence_metrics.csv", "occurrence_forecast.csv", "occurrence_forecast.svg"})
    out << "  wrote " << (dir / name).string() << '\n';
  return 0;
}

}  // namespace

int run_cli(std::span<const std::string> raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app("Hierarchical random forests with latent protected attributes", "hrf");
  app.require_subcommand(1);

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo comparison of the naive and hierarchical arms");
  simulate->add_option("--scenario", sim.scenario, "linear, nonlinear, classification or all")
      ->capture_default_str()
      ->check(CLI::IsMember({"linear", "nonlinear", "classification", "all"}));
  simulate->add_option("--n", sim.n, "Rows per train and test draw")->capture_default_str()->check(
      CLI::Range(10, 100000000));
  simulate->add_option("--b", sim.b, "Replications")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--noise-sd", sim.noise_sd, "Regression noise SD")->capture_default_str()->check(
      CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Master seed")->required();
  simulate->add_option("--feed", sim.feed, "Bottom-layer feed")->capture_default_str()->check(
      CLI::IsMember({"oob", "in-sample"}));
  simulate->add_option("--level", sim.level, "Prediction interval level")->capture_default_str()->check(
      CLI::Range(0.0, 1.0));
  simulate->add_option("--mtry-rule", sim.mtry_rule, "Default mtry: round or floor of sqrt(p)")
      ->capture_default_str()
      ->check(CLI::IsMember({"round", "floor"}));
  add_forest_flags(simulate, sim.forest, 500);
  simulate->add_option("--out", sim.out, "Output directory");

  ClusterFlags clu;
  auto* cluster = app.add_subcommand("cluster", "Soundex / Jaro-Winkler clustering of free-text labels");
  cluster->add_option("--input", clu.input, "CSV of labels with a header row")->required()->check(
      CLI::ExistingFile);
  cluster->add_option("--column", clu.column, "Label column (default: first)");
  cluster->add_option("--k", clu.k, "Force the cluster count")->check(CLI::PositiveNumber);
  cluster->add_option("--k-max", clu.k_max, "Largest k on the elbow curve")->capture_default_str()->check(
      CLI::Range(3, 1000000));
  cluster->add_option("--mode", clu.mode, "soundex-jw or raw-jw")->capture_default_str()->check(
      CLI::IsMember({"soundex-jw", "raw-jw"}));
  cluster->add_option("--linkage", clu.linkage, "average, complete or single")->capture_default_str()->check(
      CLI::IsMember({"average", "complete", "single"}));
  cluster->add_option("--out", clu.out, "Output directory");

  auto* pipeline = app.add_subcommand("pipeline", "Field-interview workflow");
  pipeline->require_subcommand(1);

  SynthFlags syn;
  auto* synth = pipeline->add_subcommand("synth", "Generate synthetic interview records");
  synth->add_option("--n", syn.n, "Records")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--seed", syn.seed, "Master seed")->required();
  synth->add_option("--link", syn.link, "Proxy-race link strength in [0, 1]")->capture_default_str()->check(
      CLI::Range(0.0, 1.0));
  synth->add_option("--first-year", syn.first_year, "First calendar year")->capture_default_str();
  synth->add_option("--years", syn.years, "Years covered")->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--out", syn.out, "Output directory");

  ReasonFlags rea;
  auto* reason = pipeline->add_subcommand("reason", "Incident-reason accuracy, hierarchical vs naive");
  add_model_flags(reason, rea, 100);
  reason->add_option("--train-fraction", rea.train_fraction, "Random-split training share")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  reason->add_flag("--save-model", rea.save_model, "Also write the hierarchical model bundle");

  OccurrenceFlags occ;
  auto* occurrence = pipeline->add_subcommand("occurrence", "One-step-ahead daily occurrence forecasts");
  add_model_flags(occurrence, occ, 300);
  occurrence->add_option("--level", occ.level, "Prediction interval level")->capture_default_str()->check(
      CLI::Range(0.0, 1.0));
  occurrence->add_option("--cutoff", occ.cutoff, "First test date (YYYY-MM-DD)")->capture_default_str();
  occurrence->add_option("--district", occ.district, "Model one district instead of city-wide totals");
  occurrence->add_option("--race-trees", occ.race_trees, "Trees in the race classifier")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  std::string config_path;
  for (auto* cmd : {simulate, cluster, synth, reason, occurrence})
    cmd->add_option("--config", config_path, "JSON file of flag values (command-line flags win)");

  try {
    std::vector<std::string> args = merge_config({raw_args.begin(), raw_args.end()});
    std::vector<const char*> argv{"hrf"};
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "hrf: " << e.what() << '\n';
    err << "run 'hrf --help' for usage\n";
    return 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, out);
    if (cluster->parsed()) return cmd_cluster(clu, out);
    if (synth->parsed()) return cmd_synth(syn, out);
    if (reason->parsed()) return cmd_reason(rea, out);
    if (occurrence->parsed()) return cmd_occurrence(occ, out);
  } catch (const ConfigError& e) {
    err << "hrf: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "hrf: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace hrf
