#include "hrf/text_cluster.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <numeric>
#include <set>

#include "hrf/error.hpp"
#include "hrf/svg.hpp"

namespace hrf {

namespace {

// Soundex digit class; '0' for vowels (and y), 'h' for the transparent h/w.
char soundex_class(char upper) {
  switch (upper) {
    case 'B': case 'F': case 'P': case 'V': return '1';
    case 'C': case 'G': case 'J': case 'K': case 'Q': case 'S': case 'X': case 'Z': return '2';
    case 'D': case 'T': return '3';
    case 'L': return '4';
    case 'M': case 'N': return '5';
    case 'R': return '6';
    case 'H': case 'W': return 'h';
    default: return '0';
  }
}

}  // namespace

SoundexCode soundex(std::string_view text) {
  SoundexCode out;
  char prev = 0;
  for (char raw : text) {
    const auto uc = static_cast<unsigned char>(raw);
    if (!std::isalpha(uc) || uc >= 0x80) continue;
    const char c = static_cast<char>(std::toupper(uc));
    const char cls = soundex_class(c);
    if (out.code.empty()) {
      out.code += c;
      prev = cls == 'h' ? '0' : cls;
      continue;
    }
    if (cls == 'h') continue;  // h and w do not separate equal codes
    if (cls == '0') {
      prev = '0';
      continue;
    }
    if (cls != prev) {
      out.code += cls;
      if (out.code.size() == 4) return out;
    }
    prev = cls;
  }
  if (out.code.empty()) return {"Z000", true};
  out.code.resize(4, '0');
  return out;
}

double jaro(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const std::ptrdiff_t la = static_cast<std::ptrdiff_t>(a.size()), lb = static_cast<std::ptrdiff_t>(b.size());
  const std::ptrdiff_t window = std::max<std::ptrdiff_t>(0, std::max(la, lb) / 2 - 1);
  std::vector<char> a_hit(a.size(), 0), b_hit(b.size(), 0);
  double matches = 0.0;
  for (std::ptrdiff_t i = 0; i < la; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - window), hi = std::min(lb - 1, i + window);
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      if (b_hit[static_cast<std::size_t>(j)] || a[static_cast<std::size_t>(i)] != b[static_cast<std::size_t>(j)]) continue;
      a_hit[static_cast<std::size_t>(i)] = b_hit[static_cast<std::size_t>(j)] = 1;
      matches += 1.0;
      break;
    }
  }
  if (matches == 0.0) return 0.0;
  double half_transpositions = 0.0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a_hit[i]) continue;
    while (!b_hit[j]) ++j;
    if (a[i] != b[j]) half_transpositions += 1.0;
    ++j;
  }
  const double t = half_transpositions / 2.0;
  return (matches / static_cast<double>(la) + matches / static_cast<double>(lb) + (matches - t) / matches) / 3.0;
}

double jaro_winkler(std::string_view a, std::string_view b, double prefix_scale) {
  if (!(prefix_scale >= 0.0 && prefix_scale <= 0.25)) throw ConfigError("prefix scale must lie in [0, 0.25]");
  const double sim = jaro(a, b);
  std::size_t prefix = 0;
  while (prefix < 4 && prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
  return sim + static_cast<double>(prefix) * prefix_scale * (1.0 - sim);
}

DistanceMode parse_distance_mode(std::string_view text) {
  if (text == "soundex-jw") return DistanceMode::soundex_jw;
  if (text == "raw-jw") return DistanceMode::raw_jw;
  throw ConfigError("unknown distance mode '" + std::string(text) + "'");
}

std::string representation(std::string_view label, DistanceMode mode) {
  std::string out;
  if (mode == DistanceMode::raw_jw) {
    for (char c : label) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  }
  std::size_t i = 0;
  while (i < label.size()) {
    while (i < label.size() && std::isspace(static_cast<unsigned char>(label[i]))) ++i;
    const std::size_t start = i;
    while (i < label.size() && !std::isspace(static_cast<unsigned char>(label[i]))) ++i;
    if (i == start) break;
    const SoundexCode code = soundex(label.substr(start, i - start));
    if (code.flagged) continue;
    if (!out.empty()) out += ' ';
    out += code.code;
  }
  return out.empty() ? std::string("Z000") : out;
}

double label_distance(std::string_view a, std::string_view b, DistanceMode mode) {
  return 1.0 - jaro_winkler(representation(a, mode), representation(b, mode));
}

DistanceMatrix distance_matrix(std::vector<std::string> labels, DistanceMode mode) {
  std::set<std::string> seen;
  for (const auto& l : labels)
    if (!seen.insert(l).second) throw ConfigError("duplicate label '" + l + "'");
  const auto n = static_cast<Eigen::Index>(labels.size());
  std::vector<std::string> reps;
  reps.reserve(labels.size());
  for (const auto& l : labels) reps.push_back(representation(l, mode));
  DistanceMatrix out;
  out.d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = 1.0 - jaro_winkler(reps[static_cast<std::size_t>(i)], reps[static_cast<std::size_t>(j)]);
      out.d(i, j) = out.d(j, i) = std::clamp(v, 0.0, 1.0);
    }
  out.labels = std::move(labels);
  return out;
}

Linkage parse_linkage(std::string_view text) {
  if (text == "average") return Linkage::average;
  if (text == "complete") return Linkage::complete;
  if (text == "single") return Linkage::single;
  throw ConfigError("unknown linkage '" + std::string(text) + "'");
}

MergeTree agglomerate(const Eigen::MatrixXd& d, Linkage linkage) {
  const int n = static_cast<int>(d.rows());
  if (n < 2) throw ConfigError("agglomeration needs at least two points");
  if (d.cols() != d.rows()) throw ConfigError("distance matrix must be square");

  // Slot i holds the cluster whose smallest member is i; merging slots a < b
  // keeps slot a. Each active slot caches its nearest active slot j > i.
  Eigen::MatrixXd work = d;
  std::vector<char> active(static_cast<std::size_t>(n), 1);
  std::vector<int> size(static_cast<std::size_t>(n), 1), id(static_cast<std::size_t>(n));
  std::iota(id.begin(), id.end(), 0);
  std::vector<int> nn(static_cast<std::size_t>(n), -1);
  std::vector<double> nn_dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  auto refresh = [&](int i) {
    nn[static_cast<std::size_t>(i)] = -1;
    nn_dist[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
    for (int j = i + 1; j < n; ++j)
      if (active[static_cast<std::size_t>(j)] && work(i, j) < nn_dist[static_cast<std::size_t>(i)]) {
        nn_dist[static_cast<std::size_t>(i)] = work(i, j);
        nn[static_cast<std::size_t>(i)] = j;
      }
  };
  for (int i = 0; i < n; ++i) refresh(i);

  MergeTree tree;
  tree.n_leaves = n;
  for (int step = 0; step < n - 1; ++step) {
    int a = -1;
    for (int i = 0; i < n; ++i)
      if (active[static_cast<std::size_t>(i)] && nn[static_cast<std::size_t>(i)] >= 0 &&
          (a < 0 || nn_dist[static_cast<std::size_t>(i)] < nn_dist[static_cast<std::size_t>(a)]))
        a = i;
    const int b = nn[static_cast<std::size_t>(a)];
    const double height = work(a, b);
    const int sa = size[static_cast<std::size_t>(a)], sb = size[static_cast<std::size_t>(b)];
    tree.merges.push_back({id[static_cast<std::size_t>(a)], id[static_cast<std::size_t>(b)], height, sa + sb});

    active[static_cast<std::size_t>(b)] = 0;
    for (int k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == a) continue;
      double v;
      switch (linkage) {
        case Linkage::average: v = (sa * work(k, a) + sb * work(k, b)) / (sa + sb); break;
        case Linkage::complete: v = std::max(work(k, a), work(k, b)); break;
        default: v = std::min(work(k, a), work(k, b)); break;
      }
      work(k, a) = work(a, k) = v;
    }
    size[static_cast<std::size_t>(a)] = sa + sb;
    id[static_cast<std::size_t>(a)] = n + step;

    for (int k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)]) continue;
      if (k == a || nn[static_cast<std::size_t>(k)] == a || nn[static_cast<std::size_t>(k)] == b) {
        refresh(k);
      } else if (k < a) {
        const double v = work(k, a);
        if (v < nn_dist[static_cast<std::size_t>(k)] ||
            (v == nn_dist[static_cast<std::size_t>(k)] && a < nn[static_cast<std::size_t>(k)])) {
          nn_dist[static_cast<std::size_t>(k)] = v;
          nn[static_cast<std::size_t>(k)] = a;
        }
      }
    }
  }
  return tree;
}

std::vector<int> cut(const MergeTree& tree, int k) {
  const int n = tree.n_leaves;
  if (k < 1 || k > n) throw ConfigError("cut needs 1 <= k <= " + std::to_string(n));
  std::vector<int> parent(static_cast<std::size_t>(2 * n - 1));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  for (int step = 0; step < n - k; ++step) {
    const Merge& m = tree.merges[static_cast<std::size_t>(step)];
    parent[static_cast<std::size_t>(find(m.left))] = n + step;
    parent[static_cast<std::size_t>(find(m.right))] = n + step;
  }
  std::vector<int> root_label(static_cast<std::size_t>(2 * n - 1), 0), out(static_cast<std::size_t>(n));
  int next = 0;
  for (int i = 0; i < n; ++i) {
    int& label = root_label[static_cast<std::size_t>(find(i))];
    if (label == 0) label = ++next;
    out[static_cast<std::size_t>(i)] = label;
  }
  return out;
}

std::vector<int> medoids(const Eigen::MatrixXd& d, const std::vector<int>& assignment, int k) {
  std::vector<int> best(static_cast<std::size_t>(k), -1);
  std::vector<double> best_cost(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
  const int n = static_cast<int>(assignment.size());
  for (int i = 0; i < n; ++i) {
    const int c = assignment[static_cast<std::size_t>(i)] - 1;
    double cost = 0.0;
    for (int j = 0; j < n; ++j)
      if (assignment[static_cast<std::size_t>(j)] - 1 == c) cost += d(i, j);
    if (cost < best_cost[static_cast<std::size_t>(c)]) {
      best_cost[static_cast<std::size_t>(c)] = cost;
      best[static_cast<std::size_t>(c)] = i;
    }
  }
  return best;
}

double medoid_cost(const Eigen::MatrixXd& d, const std::vector<int>& assignment, int k) {
  const auto med = medoids(d, assignment, k);
  double total = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    total += d(static_cast<Eigen::Index>(i), med[static_cast<std::size_t>(assignment[i] - 1)]);
  return total;
}

ElbowCurve elbow_k(const MergeTree& tree, const Eigen::MatrixXd& d, int k_max) {
  if (k_max < 3) throw ConfigError("elbow selection needs k_max >= 3");
  k_max = std::min(k_max, tree.n_leaves);
  if (k_max < 3) throw ConfigError("elbow selection needs at least three labels");
  ElbowCurve curve;
  for (int k = 1; k <= k_max; ++k) curve.cost.push_back(medoid_cost(d, cut(tree, k), k));
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 2; k < k_max; ++k) {
    const double w = curve.cost[static_cast<std::size_t>(k - 2)] - 2.0 * curve.cost[static_cast<std::size_t>(k - 1)] +
                     curve.cost[static_cast<std::size_t>(k)];
    if (w > best) {
      best = w;
      curve.k = k;
    }
  }
  return curve;
}

ClusterModel cluster_labels(std::vector<std::string> labels, const ClusterOptions& options) {
  DistanceMatrix dm = distance_matrix(std::move(labels), options.mode);
  ClusterModel model;
  model.mode = options.mode;
  model.linkage = options.linkage;
  model.tree = agglomerate(dm.d, options.linkage);
  if (options.k) {
    model.k = *options.k;
  } else {
    model.elbow = elbow_k(model.tree, dm.d, options.k_max);
    model.k = model.elbow->k;
  }
  model.assignment = cut(model.tree, model.k);
  model.medoids = medoids(dm.d, model.assignment, model.k);
  model.labels = std::move(dm.labels);
  return model;
}

int assign(const ClusterModel& model, std::string_view label) {
  for (std::size_t i = 0; i < model.labels.size(); ++i)
    if (model.labels[i] == label) return model.assignment[i];
  int best = 1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < model.k; ++c) {
    const double dist = label_distance(label, model.labels[static_cast<std::size_t>(model.medoids[static_cast<std::size_t>(c)])], model.mode);
    if (dist < best_d) {
      best_d = dist;
      best = c + 1;
    }
  }
  return best;
}

void plot_dendrogram(const ClusterModel& model, const std::filesystem::path& path) {
  const int n = model.tree.n_leaves;
  // Leaf order from a left-first traversal of the merge tree.
  std::vector<double> x(static_cast<std::size_t>(2 * n - 1), 0.0), h(static_cast<std::size_t>(2 * n - 1), 0.0);
  std::vector<int> order;
  std::vector<int> stack{2 * n - 2};
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    if (node < n) {
      order.push_back(node);
      continue;
    }
    const Merge& m = model.tree.merges[static_cast<std::size_t>(node - n)];
    stack.push_back(m.right);
    stack.push_back(m.left);
  }
  for (std::size_t r = 0; r < order.size(); ++r) x[static_cast<std::size_t>(order[r])] = static_cast<double>(r);
  double top = 0.0;
  for (int s = 0; s < n - 1; ++s) {
    const Merge& m = model.tree.merges[static_cast<std::size_t>(s)];
    x[static_cast<std::size_t>(n + s)] = (x[static_cast<std::size_t>(m.left)] + x[static_cast<std::size_t>(m.right)]) / 2.0;
    h[static_cast<std::size_t>(n + s)] = m.height;
    top = std::max(top, m.height);
  }
  const bool labelled = n <= 120;
  SvgFigure fig("dendrogram (k = " + std::to_string(model.k) + ")", labelled ? "" : "labels", "merge height",
                std::max(720.0, 14.0 * n + 120.0), labelled ? 640 : 480);
  fig.x_range(-1.0, static_cast<double>(n));
  fig.y_range(labelled ? -0.45 * std::max(top, 1e-9) : 0.0, std::max(top, 1e-9) * 1.05);
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  for (int s = 0; s < n - 1; ++s) {
    const Merge& m = model.tree.merges[static_cast<std::size_t>(s)];
    const double xm = x[static_cast<std::size_t>(n + s)], hm = m.height;
    for (int child : {m.left, m.right}) {
      std::string color = "#444";
      if (s < n - model.k && child < n) color = palette[(model.assignment[static_cast<std::size_t>(child)] - 1) % 10];
      fig.segment(x[static_cast<std::size_t>(child)], h[static_cast<std::size_t>(child)], x[static_cast<std::size_t>(child)], hm, color);
    }
    fig.segment(x[static_cast<std::size_t>(m.left)], hm, x[static_cast<std::size_t>(m.right)], hm, "#444");
    (void)xm;
  }
  if (labelled)
    for (int i = 0; i < n; ++i) fig.text(x[static_cast<std::size_t>(i)], -0.01 * top, model.labels[static_cast<std::size_t>(i)], 9, true);
  fig.save(path);
}

}  // namespace hrf
