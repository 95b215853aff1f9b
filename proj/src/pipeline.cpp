#include "hrf/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>

#include "hrf/csv.hpp"
#include "hrf/error.hpp"
#include "hrf/quantile_forest.hpp"
#include "hrf/rng.hpp"
#include "hrf/svg.hpp"

namespace hrf {

// ---------------------------------------------------------------------------
// Records CSV

std::vector<InterviewRecord> read_records(std::istream& in) {
  const CsvTable table = read_csv(in);
  if (table.header != kRecordColumns)
    throw ParseError("records header must be sex,street,district,city,date,priors,race,skin_complexion,clothing,"
                     "incident_reason");
  std::vector<InterviewRecord> out;
  out.reserve(table.rows.size());
  long row = 0;
  for (const auto& cells : table.rows) {
    ++row;
    if (cells.size() != kRecordColumns.size())
      throw ParseError("expected " + std::to_string(kRecordColumns.size()) + " fields, found " +
                           std::to_string(cells.size()),
                       row);
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (cells[c].empty() || cells[c] == "NA") throw ParseError("missing value in column '" + kRecordColumns[c] + "'", row);
    InterviewRecord r;
    r.sex = cells[0];
    r.street = cells[1];
    r.district = cells[2];
    r.city = cells[3];
    try {
      r.date = parse_date(cells[4]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), row);
    }
    if (!parse_number(cells[5], r.priors)) throw ParseError("priors '" + cells[5] + "' is not a number", row);
    r.race = cells[6];
    r.skin_complexion = cells[7];
    r.clothing = cells[8];
    r.incident_reason = cells[9];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<InterviewRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_records(in);
}

void write_records(std::ostream& out, const std::vector<InterviewRecord>& records) {
  write_csv_row(out, kRecordColumns);
  for (const auto& r : records) {
    const std::vector<std::string> fields = {r.sex,  r.street,          r.district,       r.city,
                                             format_date(r.date), format_number(r.priors), r.race,
                                             r.skin_complexion, r.clothing, r.incident_reason};
    write_csv_row(out, fields);
  }
}

void write_records(const std::filesystem::path& path, const std::vector<InterviewRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  write_records(out, records);
}

// ---------------------------------------------------------------------------
// Synthetic records

namespace {

const std::vector<std::string> kCities = {"Boston",      "East Boston", "Roxbury",       "Mattapan",
                                          "South Boston", "Dorchester", "South End",     "Brighton",
                                          "West Roxbury", "Jamaica Plain", "Hyde Park"};
const std::vector<double> kDistrictWeight = {1.3, 0.7, 1.6, 1.1, 0.8, 1.5, 1.0, 0.7, 0.5, 0.8, 0.6};
// Index into synth_races() of each district's majority group.
const std::vector<int> kDistrictMode = {1, 2, 0, 0, 1, 0, 1, 3, 1, 2, 0};
const std::vector<double> kRaceMarginal = {0.40, 0.30, 0.18, 0.08, 0.04};
const std::vector<std::string> kSkin = {"Light", "Fair", "Medium", "Olive", "Brown", "Dark"};
const std::vector<int> kRaceSkin = {5, 0, 3, 1, 2};

const std::vector<std::string> kStreetNames = {
    "WASHINGTON", "BLUE HILL",  "DORCHESTER", "COLUMBIA",   "TREMONT",   "BOYLSTON",  "CENTRE",     "HYDE PARK",
    "MASSACHUSETTS", "HARRISON", "WARREN",    "GENEVA",     "BOWDOIN",   "MERIDIAN",  "BENNINGTON", "BROADWAY",
    "CAMBRIDGE", "COMMONWEALTH", "HUNTINGTON", "RIVER",     "NORFOLK",   "AMERICAN LEGION", "SARATOGA", "SOUTH",
    "HANCOCK",   "ADAMS",       "GALLIVAN",   "MORTON",     "HOMES",     "CUMMINS",   "WASHINGTON PARK", "PARIS",
    "EAST BROADWAY", "SUMMER",  "ATLANTIC",   "CHARLES",    "BEACON",    "COURT",     "FRANKLIN",   "WALK HILL"};

const std::vector<std::string> kClothingBases = {"BLACK HOODIE",  "BLUE JEANS",     "GRAY SWEATSHIRT",
                                                 "WHITE TSHIRT",  "RED JACKET",     "GREEN ARMY COAT",
                                                 "NAVY PARKA",    "TAN KHAKIS",     "BROWN LEATHER BOOTS",
                                                 "PURPLE TRACKSUIT"};

const std::vector<std::vector<std::string>> kReasonBases = {
    {"ASSAULT", "ASSAULT AND BATTERY", "ASSAULT BATTERY DANGEROUS WEAPON", "AGGRAVATED ASSAULT", "SIMPLE ASSAULT",
     "BATTERY", "ASSAULT ON OFFICER", "DOMESTIC ASSAULT", "ASSAULT WITH INTENT", "BATTERY ON POLICE", "FIGHT",
     "AFFRAY", "STRANGULATION"},
    {"MOTOR VEHICLE VIOLATION", "TRAFFIC STOP", "OPERATING AFTER SUSPENSION", "OPERATING UNDER INFLUENCE",
     "SPEEDING", "UNLICENSED OPERATION", "AUTO LAW VIOLATION", "UNREGISTERED VEHICLE", "UNINSURED VEHICLE",
     "LEAVING SCENE", "RECKLESS DRIVING", "PARKING VIOLATION", "VEHICLE TOWED"},
    {"LARCENY", "THEFT", "SHOPLIFTING", "LARCENY FROM VEHICLE", "VANDALISM", "BURGLARY", "BREAKING AND ENTERING",
     "STOLEN PROPERTY", "THIEF", "ROBBERY", "PICKPOCKET", "GRAFFITI", "STOLEN BICYCLE"},
    {"DRUG INVESTIGATION", "NARCOTICS", "DRUG POSSESSION", "DRUG DISTRIBUTION", "POSSESSION CLASS B", "MARIJUANA",
     "HEROIN", "COCAINE", "ALCOHOL", "DRINKING IN PUBLIC", "LIQUOR LAW", "OPEN CONTAINER", "DRUG SALE"},
    {"HOMICIDE", "SHOOTING", "SHOTS FIRED", "FIREARM", "FIREARM POSSESSION", "GUN", "SUICIDE", "MURDER",
     "ARMED PERSON", "DEADLY WEAPON", "STABBING", "KNIFE", "BALLISTICS"},
    {"HARASSMENT", "PROTECTIVE ORDER", "RESTRAINING ORDER", "TRESPASSING", "DISORDERLY CONDUCT",
     "INVESTIGATE PERSON", "SUSPICIOUS ACTIVITY", "WARRANT", "GANG ACTIVITY", "THREATS", "LOITERING",
     "NOISE COMPLAINT", "MISSING PERSON"}};

constexpr std::size_t kReasonVocabularySize = 233;

bool is_vowel(char c) { return c == 'A' || c == 'E' || c == 'I' || c == 'O' || c == 'U'; }

// Drops the first vowel after the first letter of word `word`.
std::string drop_vowel(const std::string& s, int word) {
  std::size_t start = 0;
  for (int w = 0; w < word; ++w) {
    start = s.find(' ', start);
    if (start == std::string::npos) return s;
    ++start;
  }
  for (std::size_t i = start + 1; i < s.size() && s[i] != ' '; ++i)
    if (is_vowel(s[i])) return s.substr(0, i) + s.substr(i + 1);
  return s;
}

// Doubles the last letter of the first word.
std::string double_letter(const std::string& s) {
  const std::size_t end = std::min(s.find(' '), s.size());
  return s.substr(0, end) + s[end - 1] + s.substr(end);
}

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::vector<std::string>> clothing_variants() {
  std::vector<std::vector<std::string>> out;
  for (const auto& base : kClothingBases) {
    std::vector<std::string> v = {base,
                                  lowercase(base),
                                  drop_vowel(base, 0),
                                  drop_vowel(base, 1),
                                  double_letter(base),
                                  base + " W/ HAT",
                                  base + " AND SNEAKERS"};
    std::vector<std::string> unique;
    for (auto& s : v)
      if (std::find(unique.begin(), unique.end(), s) == unique.end()) unique.push_back(std::move(s));
    out.push_back(std::move(unique));
  }
  return out;
}

// Day index -> seasonal volume multiplier times an AR(1) latent factor.
std::vector<double> daily_intensity(int days, Date first, Rng& rng) {
  std::vector<double> out(static_cast<std::size_t>(days));
  double z = 0.0;
  for (int t = 0; t < days; ++t) {
    const Date d = first + std::chrono::days(t);
    const auto ymd = std::chrono::year_month_day(d);
    const int doy = (d - Date(ymd.year() / 1 / 1)).count();
    z = 0.6 * z + 0.25 * rng.normal();
    const double season = 0.35 * std::sin(2.0 * std::numbers::pi * (doy - 100) / 365.25);
    out[static_cast<std::size_t>(t)] = std::exp(season + z);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& synth_races() {
  static const std::vector<std::string> races = {"Black", "White", "Hispanic", "Asian", "Other"};
  return races;
}

const std::vector<std::string>& synth_districts() {
  static const std::vector<std::string> districts = {"A1", "A7", "B2", "B3", "C6", "C11",
                                                     "D4", "D14", "E5", "E13", "E18"};
  return districts;
}

const std::vector<std::pair<std::string, int>>& synth_reason_vocabulary() {
  static const std::vector<std::pair<std::string, int>> vocab = [] {
    std::vector<std::pair<std::string, int>> out;
    std::set<std::string> seen;
    const std::size_t per = kReasonBases[0].size();
    for (int variant = 0; variant < 5 && out.size() < kReasonVocabularySize; ++variant)
      for (std::size_t b = 0; b < per && out.size() < kReasonVocabularySize; ++b)
        for (std::size_t c = 0; c < kReasonBases.size() && out.size() < kReasonVocabularySize; ++c) {
          const std::string& base = kReasonBases[c][b];
          std::string s;
          switch (variant) {
            case 0: s = base; break;
            case 1: s = drop_vowel(base, 0); break;
            case 2: s = base + " INV"; break;
            case 3: s = double_letter(base); break;
            default: s = "ATTEMPTED " + base; break;
          }
          if (seen.insert(s).second) out.emplace_back(s, static_cast<int>(c) + 1);
        }
    return out;
  }();
  return vocab;
}

std::vector<InterviewRecord> synth_generate(const SynthSpec& spec) {
  if (spec.n < 1) throw ConfigError("synthetic record count must be positive");
  if (!(spec.link_strength >= 0.0 && spec.link_strength <= 1.0)) throw ConfigError("link strength must lie in [0, 1]");
  if (spec.years < 1) throw ConfigError("synthetic span must cover at least one year");

  const Date first = Date(std::chrono::year(spec.first_year) / 1 / 1);
  const Date end = Date(std::chrono::year(spec.first_year + spec.years) / 1 / 1);
  const int days = (end - first).count();

  Rng day_rng(derive_seed(spec.seed, "days"));
  const std::vector<double> intensity = daily_intensity(days, first, day_rng);
  std::vector<double> cumulative(intensity.size());
  std::partial_sum(intensity.begin(), intensity.end(), cumulative.begin());
  std::vector<int> day_of(static_cast<std::size_t>(spec.n));
  for (int& d : day_of) {
    const double u = day_rng.uniform() * cumulative.back();
    d = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    d = std::min(d, days - 1);
  }
  std::sort(day_of.begin(), day_of.end());

  const auto& races = synth_races();
  const auto& districts = synth_districts();
  const auto& vocab = synth_reason_vocabulary();
  const auto clothing = clothing_variants();

  std::vector<std::vector<std::size_t>> vocab_by_category(6);
  std::vector<std::vector<double>> vocab_weight(6);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const int c = vocab[i].second - 1;
    const double rank = static_cast<double>(vocab_by_category[static_cast<std::size_t>(c)].size());
    vocab_by_category[static_cast<std::size_t>(c)].push_back(i);
    vocab_weight[static_cast<std::size_t>(c)].push_back(1.0 / (1.0 + 0.15 * rank));
  }

  Rng rng(derive_seed(spec.seed, "records"));
  const double link = spec.link_strength;
  std::vector<InterviewRecord> out;
  out.reserve(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    InterviewRecord r;
    r.date = first + std::chrono::days(day_of[static_cast<std::size_t>(i)]);
    const std::size_t d = rng.categorical(kDistrictWeight);
    r.district = districts[d];
    r.city = kCities[d];
    const std::size_t street = (d * 5 + rng.below(12)) % kStreetNames.size();
    r.street = kStreetNames[street] + (street % 3 == 0 ? " AVE" : " ST");

    const std::size_t race = rng.bernoulli(link) ? static_cast<std::size_t>(kDistrictMode[d])
                                                 : rng.categorical(kRaceMarginal);
    r.race = races[race];
    r.skin_complexion = rng.bernoulli(link) ? kSkin[static_cast<std::size_t>(kRaceSkin[race])]
                                            : kSkin[rng.below(kSkin.size())];
    const std::size_t base = rng.bernoulli(0.5 * link) ? 2 * race : rng.below(clothing.size());
    r.clothing = clothing[base][rng.below(clothing[base].size())];

    const bool female = rng.bernoulli(0.15);
    r.sex = female ? "Female" : "Male";
    r.priors = rng.bernoulli(0.45) ? 0.0 : 1.0 + std::floor(std::log(1.0 - rng.uniform()) / std::log(0.7));
    r.priors = std::min(r.priors, 30.0);

    const int quarter = quarter_of(r.date);
    std::array<double, 6> logit{};
    for (int c = 0; c < 6; ++c) {
      double v = 2.0 * std::sin(1.3 * static_cast<double>(d) + 2.1 * c);
      if (female) v += (c == 5 ? 1.2 : 0.0) - (c == 4 ? 1.0 : 0.0);
      if (c == 3 || c == 4) v += 0.3 * std::min(r.priors, 5.0);
      if (quarter == 3 && (c == 0 || c == 3)) v += 0.4;
      if (quarter == 1 && c == 1) v += 0.3;
      v += 0.25 * std::cos(static_cast<double>(race) + c);
      logit[static_cast<std::size_t>(c)] = std::exp(v);
    }
    const std::size_t category = rng.categorical(logit);
    const std::size_t pick = rng.categorical(vocab_weight[category]);
    r.incident_reason = vocab[vocab_by_category[category][pick]].first;
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preprocessing

namespace {

std::vector<std::string> sorted_levels(const std::vector<InterviewRecord>& records,
                                       const std::string InterviewRecord::*field) {
  std::set<std::string> levels;
  for (const auto& r : records) levels.insert(r.*field);
  return {levels.begin(), levels.end()};
}

ColumnSchema categorical(std::string name, std::vector<std::string> levels) {
  ColumnSchema s;
  s.name = std::move(name);
  s.kind = ColumnKind::categorical;
  s.levels = std::move(levels);
  return s;
}

ColumnSchema numeric(std::string name) {
  ColumnSchema s;
  s.name = std::move(name);
  return s;
}

// Clusters the distinct labels; fewer labels than k collapse to one cluster
// per label.
ClusterModel cluster_distinct(std::vector<std::string> labels, ClusterOptions options) {
  const int n = static_cast<int>(labels.size());
  if (n == 1) {
    ClusterModel m;
    m.mode = options.mode;
    m.linkage = options.linkage;
    m.k = 1;
    m.labels = std::move(labels);
    m.assignment = {1};
    m.medoids = {0};
    m.tree.n_leaves = 1;
    return m;
  }
  if (options.k) options.k = std::min(*options.k, n);
  else if (n < 3) options.k = n;
  return cluster_labels(std::move(labels), options);
}

std::vector<std::string> numbered(const std::string& prefix, int k) {
  std::vector<std::string> out;
  for (int i = 1; i <= k; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::vector<int> lookup_clusters(const ClusterModel& model, const std::vector<InterviewRecord>& records,
                                 const std::string InterviewRecord::*field) {
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < model.labels.size(); ++i) index.emplace(model.labels[i], model.assignment[i]);
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(index.at(r.*field));
  return out;
}

}  // namespace

Preprocessed preprocess(const std::vector<InterviewRecord>& records, const PreprocessOptions& options) {
  if (records.empty()) throw Error("no records to preprocess");
  Preprocessed out;
  out.reason = cluster_distinct(sorted_levels(records, &InterviewRecord::incident_reason), options.reason);
  out.clothing = cluster_distinct(sorted_levels(records, &InterviewRecord::clothing), options.clothing);
  out.reason_cluster = lookup_clusters(out.reason, records, &InterviewRecord::incident_reason);
  out.clothing_cluster = lookup_clusters(out.clothing, records, &InterviewRecord::clothing);

  using Field = const std::string InterviewRecord::*;
  const std::vector<std::pair<std::string, Field>> text_columns = {{"sex", &InterviewRecord::sex},
                                                                   {"street", &InterviewRecord::street},
                                                                   {"district", &InterviewRecord::district},
                                                                   {"city", &InterviewRecord::city}};
  std::vector<ColumnSchema> schema;
  for (const auto& [name, field] : text_columns) schema.push_back(categorical(name, sorted_levels(records, field)));
  schema.push_back(numeric("priors"));
  ColumnSchema race = categorical("race", sorted_levels(records, &InterviewRecord::race));
  race.is_protected = true;
  schema.push_back(race);
  schema.push_back(categorical("skin_complexion", sorted_levels(records, &InterviewRecord::skin_complexion)));
  schema.push_back(categorical("clothing_cluster", numbered("C", out.clothing.k)));
  for (const char* q : {"q2", "q3", "q4"}) schema.push_back(numeric(q));
  ColumnSchema date;
  date.name = "date";
  date.kind = ColumnKind::date;
  schema.push_back(date);
  ColumnSchema response;
  response.name = "reason_cluster";
  response.kind = ColumnKind::response;
  response.response_type = ValueType::categorical;
  response.levels = numbered("R", out.reason.k);
  schema.push_back(response);

  auto index_of = [](const ColumnSchema& s) {
    std::unordered_map<std::string, int> m;
    for (std::size_t i = 0; i < s.levels.size(); ++i) m.emplace(s.levels[i], static_cast<int>(i));
    return m;
  };
  const auto sex = index_of(schema[0]), street = index_of(schema[1]), district = index_of(schema[2]),
             city = index_of(schema[3]), race_idx = index_of(schema[5]), skin = index_of(schema[6]);

  const auto n = static_cast<Eigen::Index>(records.size());
  Eigen::MatrixXd cells(n, static_cast<Eigen::Index>(schema.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    const int q = quarter_of(r.date);
    cells.row(i) << sex.at(r.sex), street.at(r.street), district.at(r.district), city.at(r.city), r.priors,
        race_idx.at(r.race), skin.at(r.skin_complexion), out.clothing_cluster[static_cast<std::size_t>(i)] - 1,
        q == 2, q == 3, q == 4, to_day_number(r.date), out.reason_cluster[static_cast<std::size_t>(i)] - 1;
  }
  out.data = Dataset(std::move(schema), std::move(cells));
  return out;
}

// ---------------------------------------------------------------------------
// Incident reason

namespace {

HierarchicalSpec hier_spec(const ReasonConfig& config) {
  HierarchicalSpec spec;
  spec.proxies = config.proxies;
  spec.protected_column = config.protected_column;
  spec.outcome = "reason_cluster";
  spec.top_covariates = config.top_covariates;
  spec.bottom = config.forest;
  spec.top = config.forest;
  spec.feed = config.feed;
  spec.seed = config.seed;
  return spec;
}

}  // namespace

ReasonModel fit_reason_model(const Dataset& ds, ArmMode mode, const ReasonConfig& config) {
  if (config.proxies.empty()) throw ConfigError("the race proxy set is empty");
  ReasonModel model;
  model.mode = mode;
  if (mode == ArmMode::hier) {
    model.hier = fit_hier(ds, hier_spec(config));
  } else {
    auto covariates = config.top_covariates;
    covariates.push_back(config.protected_column);
    model.naive = fit_naive(ds, "reason_cluster", covariates, config.forest, config.seed);
  }
  return model;
}

Eigen::VectorXd predict_reason(const ReasonModel& model, const Dataset& ds) {
  if (model.hier) return predict_hier(*model.hier, ds);
  return predict(*model.naive, ds);
}

ReasonComparison compare_reason(const Dataset& ds, const ReasonConfig& config, double train_fraction) {
  const auto [train, test] = split(ds, RandomSplit{train_fraction, derive_seed(config.seed, "split")});
  ReasonComparison out;
  out.hier = fit_reason_model(train, ArmMode::hier, config);
  out.naive = fit_reason_model(train, ArmMode::naive, config);

  const Eigen::VectorXd actual = test.response();
  const Eigen::VectorXd hier_pred = predict_reason(out.hier, test);
  const Eigen::VectorXd naive_pred = predict_reason(out.naive, test);
  out.hier_accuracy = accuracy(hier_pred, actual);
  out.naive_accuracy = accuracy(naive_pred, actual);
  out.n_test_hier = hier_pred.size();
  out.n_test_naive = naive_pred.size();

  const Eigen::VectorXd race_pred = predict_protected(*out.hier.hier, test);
  out.race_accuracy = accuracy(race_pred, test.column(config.protected_column));

  const auto& levels = ds.column_schema(ds.response_index()).levels;
  out.hier_confusion = confusion(hier_pred.cast<int>(), actual.cast<int>(), levels);
  out.naive_confusion = confusion(naive_pred.cast<int>(), actual.cast<int>(), levels);
  return out;
}

// ---------------------------------------------------------------------------
// Daily occurrence

DailyPanel build_daily_panel(std::span<const Date> dates, std::span<const int> reason,
                             std::vector<std::string> reason_levels, std::span<const int> race,
                             std::vector<std::string> race_levels, std::span<const std::string> district,
                             std::vector<std::string> district_levels) {
  if (dates.empty()) throw Error("cannot build a daily panel from zero records");
  if (reason.size() != dates.size() || race.size() != dates.size() || district.size() != dates.size())
    throw Error("record columns differ in length");
  const auto [lo, hi] = std::minmax_element(dates.begin(), dates.end());
  const Date first = *lo;
  const Eigen::Index days = (*hi - first).count() + 1;

  DailyPanel p;
  p.reason_levels = std::move(reason_levels);
  p.race_levels = std::move(race_levels);
  p.district_levels = std::move(district_levels);
  for (Eigen::Index t = 0; t < days; ++t) p.dates.push_back(first + std::chrono::days(t));
  p.count = Eigen::VectorXd::Zero(days);
  p.reason = Eigen::MatrixXd::Zero(days, static_cast<Eigen::Index>(p.reason_levels.size()));
  p.race = Eigen::MatrixXd::Zero(days, static_cast<Eigen::Index>(p.race_levels.size()));
  p.district = Eigen::MatrixXd::Zero(days, static_cast<Eigen::Index>(p.district_levels.size()));

  std::unordered_map<std::string, Eigen::Index> district_index;
  for (std::size_t i = 0; i < p.district_levels.size(); ++i)
    district_index.emplace(p.district_levels[i], static_cast<Eigen::Index>(i));

  for (std::size_t i = 0; i < dates.size(); ++i) {
    const Eigen::Index t = (dates[i] - first).count();
    p.count(t) += 1.0;
    if (reason[i] < 0 || reason[i] >= p.reason.cols()) throw Error("reason level out of range");
    if (race[i] < 0 || race[i] >= p.race.cols()) throw Error("race level out of range");
    const auto it = district_index.find(district[i]);
    if (it == district_index.end()) throw Error("district '" + district[i] + "' is not a listed level");
    p.reason(t, reason[i]) += 1.0;
    p.race(t, race[i]) += 1.0;
    p.district(t, it->second) += 1.0;
  }
  p.empty_day.resize(static_cast<std::size_t>(days));
  for (Eigen::Index t = 0; t < days; ++t) {
    p.empty_day[static_cast<std::size_t>(t)] = p.count(t) == 0.0;
    if (p.count(t) > 0.0) {
      p.reason.row(t) /= p.count(t);
      p.race.row(t) /= p.count(t);
      p.district.row(t) /= p.count(t);
    }
  }
  p.quarter = quarter_dummies(p.dates);

  auto lag = [](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    if (m.rows() > 1) out.bottomRows(m.rows() - 1) = m.topRows(m.rows() - 1);
    return out;
  };
  p.lag_count = lag(p.count);
  p.lag_reason = lag(p.reason);
  p.lag_race = lag(p.race);
  p.lag_district = lag(p.district);
  return p;
}

Dataset occurrence_dataset(const DailyPanel& panel, const std::string& race_prefix) {
  const Eigen::Index rows = panel.days() - 1;
  if (rows < 1) throw Error("the occurrence model needs at least two days of data");
  std::vector<ColumnSchema> schema;
  std::vector<const Eigen::MatrixXd*> blocks;
  schema.push_back(numeric("lag1_count"));
  auto add_block = [&](const std::string& prefix, const std::vector<std::string>& levels, const Eigen::MatrixXd& m) {
    for (const auto& l : levels) schema.push_back(numeric("lag1_" + prefix + "_" + l));
    blocks.push_back(&m);
  };
  add_block("reason", panel.reason_levels, panel.lag_reason);
  add_block(race_prefix, panel.race_levels, panel.lag_race);
  add_block("district", panel.district_levels, panel.lag_district);
  for (const char* q : {"q2", "q3", "q4"}) schema.push_back(numeric(q));
  ColumnSchema date;
  date.name = "date";
  date.kind = ColumnKind::date;
  schema.push_back(date);
  ColumnSchema response = numeric("count");
  response.kind = ColumnKind::response;
  schema.push_back(response);

  Eigen::MatrixXd cells(rows, static_cast<Eigen::Index>(schema.size()));
  Eigen::Index c = 0;
  cells.col(c++) = panel.lag_count.tail(rows);
  for (const auto* m : blocks) {
    cells.middleCols(c, m->cols()) = m->bottomRows(rows);
    c += m->cols();
  }
  cells.middleCols(c, 3) = panel.quarter.bottomRows(rows);
  c += 3;
  for (Eigen::Index t = 0; t < rows; ++t) cells(t, c) = to_day_number(panel.dates[static_cast<std::size_t>(t + 1)]);
  cells.col(c + 1) = panel.count.tail(rows);
  return Dataset(std::move(schema), std::move(cells));
}

namespace {

OccurrenceArm run_occurrence_arm(const std::string& name, const Dataset& ds, const OccurrenceConfig& config,
                                 long& n_train, long& n_test) {
  const auto idx = split_indices(ds, TemporalSplit{config.cutoff, "date"});
  const Dataset train = ds.take_rows(idx.train), test = ds.take_rows(idx.test);
  std::vector<std::string> features;
  for (const auto& s : ds.schema())
    if (s.kind != ColumnKind::response && s.kind != ColumnKind::date) features.push_back(s.name);

  ForestConfig cfg = config.forest;
  cfg.task = Task::regression;
  cfg.seed = derive_seed(config.seed, "occurrence");
  auto forest = std::make_shared<Forest>(fit(train.project(features, "count"), cfg));
  const QuantileIndex qrf(forest, train.response());
  const Eigen::MatrixXd x = align(*forest, test);

  OccurrenceArm arm;
  arm.name = name;
  arm.truth = test.response();
  arm.predicted = predict(*forest, x);
  const auto intervals = qrf.intervals(x, config.level);
  arm.lower.resize(x.rows());
  arm.upper.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    arm.lower(i) = intervals[static_cast<std::size_t>(i)].lower;
    arm.upper(i) = intervals[static_cast<std::size_t>(i)].upper;
  }
  arm.report = regression_report(arm.predicted, arm.truth, intervals);
  const Eigen::Index date_col = test.index_of("date");
  for (Eigen::Index i = 0; i < test.rows(); ++i) arm.dates.push_back(from_day_number(test.cells()(i, date_col)));
  arm.forest = *forest;
  n_train = static_cast<long>(train.rows());
  n_test = static_cast<long>(test.rows());
  return arm;
}

}  // namespace

OccurrenceComparison compare_occurrence(const Preprocessed& prep, const ReasonConfig& reason,
                                        const OccurrenceConfig& config) {
  const Dataset& all = prep.data;
  std::vector<Eigen::Index> rows;
  const Eigen::Index district_col = all.index_of("district");
  const auto& district_levels = all.column_schema(district_col).levels;
  std::optional<double> district_code;
  if (config.district) {
    const int code = all.column_schema(district_col).level_index(*config.district);
    if (code < 0) throw ConfigError("unknown district '" + *config.district + "'");
    district_code = code;
  }
  for (Eigen::Index i = 0; i < all.rows(); ++i)
    if (!district_code || all.cells()(i, district_col) == *district_code) rows.push_back(i);
  if (rows.empty()) throw Error("no records for the occurrence model");
  const Dataset ds = all.take_rows(rows);

  const Eigen::Index date_col = ds.index_of("date");
  const double cutoff = to_day_number(config.cutoff);
  std::vector<Eigen::Index> before, after;
  for (Eigen::Index i = 0; i < ds.rows(); ++i) (ds.cells()(i, date_col) < cutoff ? before : after).push_back(i);
  if (before.empty()) throw DegenerateSplitError("no records before the cutoff to fit the race model");

  // Race predicted from proxies, fit on pre-cutoff records only; training
  // rows get out-of-bag predictions.
  OccurrenceComparison out;
  ForestConfig race_cfg = reason.forest;
  race_cfg.task = Task::classification;
  race_cfg.seed = derive_seed(config.seed, "race");
  out.race_model = fit(ds.take_rows(before).project(reason.proxies, reason.protected_column), race_cfg);
  Eigen::VectorXd predicted_race(ds.rows());
  {
    const Eigen::MatrixXd x_before = align(out.race_model, ds.take_rows(before));
    const Eigen::VectorXd oob = predict_oob(out.race_model, x_before).value;
    for (std::size_t i = 0; i < before.size(); ++i) predicted_race(before[i]) = oob(static_cast<Eigen::Index>(i));
    if (!after.empty()) {
      const Eigen::VectorXd rest = predict(out.race_model, ds.take_rows(after));
      for (std::size_t i = 0; i < after.size(); ++i) predicted_race(after[i]) = rest(static_cast<Eigen::Index>(i));
    }
  }

  std::vector<Date> dates;
  std::vector<int> reason_idx, race_obs, race_hat;
  std::vector<std::string> district;
  const Eigen::Index race_col = ds.index_of(reason.protected_column);
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    dates.push_back(from_day_number(ds.cells()(i, date_col)));
    reason_idx.push_back(static_cast<int>(ds.response()(i)));
    race_obs.push_back(static_cast<int>(ds.cells()(i, race_col)));
    race_hat.push_back(static_cast<int>(predicted_race(i)));
    district.push_back(district_levels[static_cast<std::size_t>(ds.cells()(i, district_col))]);
  }
  const auto& reason_levels = ds.column_schema(ds.response_index()).levels;
  const auto& race_levels = ds.column_schema(race_col).levels;
  const DailyPanel observed =
      build_daily_panel(dates, reason_idx, reason_levels, race_obs, race_levels, district, district_levels);
  const DailyPanel predicted =
      build_daily_panel(dates, reason_idx, reason_levels, race_hat, race_levels, district, district_levels);

  out.naive = run_occurrence_arm("naive", occurrence_dataset(observed, "race"), config, out.n_train, out.n_test);
  out.hier = run_occurrence_arm("hier", occurrence_dataset(predicted, "pred_race"), config, out.n_train, out.n_test);
  return out;
}

// ---------------------------------------------------------------------------
// Artifacts

void write_reason_table(std::ostream& out, const ReasonComparison& cmp) {
  out << "arm,accuracy,n_test\n";
  out << "hier," << format_number(cmp.hier_accuracy) << ',' << cmp.n_test_hier << '\n';
  out << "naive," << format_number(cmp.naive_accuracy) << ',' << cmp.n_test_naive << '\n';
}

void write_occurrence_table(std::ostream& out, const OccurrenceComparison& cmp) {
  write_report_header(out);
  write_report_row(out, "hier", cmp.hier.report);
  write_report_row(out, "naive", cmp.naive.report);
}

void write_forecast(std::ostream& out, const OccurrenceComparison& cmp) {
  out << "date,truth,hier_prediction,hier_lower,hier_upper,naive_prediction,naive_lower,naive_upper\n";
  for (std::size_t i = 0; i < cmp.hier.dates.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << format_date(cmp.hier.dates[i]) << ',' << format_number(cmp.hier.truth(k)) << ','
        << format_number(cmp.hier.predicted(k)) << ',' << format_number(cmp.hier.lower(k)) << ','
        << format_number(cmp.hier.upper(k)) << ',' << format_number(cmp.naive.predicted(k)) << ','
        << format_number(cmp.naive.lower(k)) << ',' << format_number(cmp.naive.upper(k)) << '\n';
  }
}

void plot_forecast(const OccurrenceComparison& cmp, const std::filesystem::path& path) {
  const auto& h = cmp.hier;
  const auto& n = cmp.naive;
  if (h.dates.empty()) throw Error("no test days to plot");
  std::vector<double> x(h.dates.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>((h.dates[i] - h.dates.front()).count());
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  const auto truth = vec(h.truth), hp = vec(h.predicted), hl = vec(h.lower), hu = vec(h.upper), np = vec(n.predicted);

  std::vector<double> extent = hl;
  extent.insert(extent.end(), hu.begin(), hu.end());
  extent.insert(extent.end(), np.begin(), np.end());
  const auto [ylo, yhi] = padded_range(truth, extent);

  SvgFigure fig("daily interviews from " + format_date(h.dates.front()), "day", "count");
  fig.x_range(-1.0, x.back() + 1.0);
  fig.y_range(ylo, yhi);
  fig.band(x, hl, hu, "#1f77b4", 0.2);
  fig.points(x, truth, "#222222", 1.8);
  fig.polyline(x, np, "#d62728", 1.2);
  fig.polyline(x, hp, "#1f77b4", 1.2);
  fig.legend("observed", "#222222");
  fig.legend("without proxy", "#d62728");
  fig.legend("with proxy (90% interval shaded)", "#1f77b4");
  fig.save(path);
}

}  // namespace hrf
