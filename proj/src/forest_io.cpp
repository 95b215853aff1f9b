// Forest file format, version 1. Line oriented, UTF-8:
//
//   hrf-forest 1
//   task regression|classification
//   config <n_trees> <mtry> <min_node_size> <bootstrap 0|1> <seed>
//   n_train <n>
//   response <name>
//   classes <k>            followed by k lines "level <name>"
//   features <p>           followed by p lines "feature numeric <name>" or
//                          "feature categorical <L> <name>" + L level lines
//   tree <nodes> <members> <bootstrap>
//   node <kind 0|1|2> <feature> <cut> <left> <right> <value> <begin> <end>
//   members <ids...>
//   bootstrap <ids...>
//   end
//
// Reals are C99 hex floats. Names run to end of line and must not contain
// line breaks.

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "hrf/error.hpp"
#include "hrf/forest.hpp"

namespace hrf {

namespace {

std::string hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double unhex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ParseError("bad real '" + s + "' in forest file");
  return v;
}

void put_name(std::ostream& out, const std::string& name) {
  if (name.find_first_of("\r\n") != std::string::npos) throw Error("name '" + name + "' contains a line break");
  out << name << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::istringstream line(const std::string& keyword) {
    std::string text;
    if (!std::getline(in_, text)) throw ParseError("forest file ends early, expected '" + keyword + "'");
    ++line_;
    std::istringstream ss(text);
    std::string head;
    ss >> head;
    if (head != keyword) throw ParseError("expected '" + keyword + "', found '" + head + "'", line_);
    return ss;
  }

  static std::string rest(std::istringstream& ss) {
    std::string s;
    std::getline(ss >> std::ws, s);
    return s;
  }

  template <typename T>
  static T get(std::istringstream& ss) {
    T v;
    if (!(ss >> v)) throw ParseError("malformed forest record");
    return v;
  }

 private:
  std::istream& in_;
  long line_ = 0;
};

}  // namespace

void save_forest(std::ostream& out, const Forest& forest) {
  const auto& c = forest.config;
  out << "hrf-forest 1\n";
  out << "task " << (c.task == Task::regression ? "regression" : "classification") << '\n';
  out << "config " << c.n_trees << ' ' << c.mtry << ' ' << c.min_node_size << ' ' << (c.bootstrap ? 1 : 0) << ' '
      << c.seed << '\n';
  out << "n_train " << forest.n_train << '\n';
  out << "response ";
  put_name(out, forest.response);
  out << "classes " << forest.classes.size() << '\n';
  for (const auto& l : forest.classes) {
    out << "level ";
    put_name(out, l);
  }
  out << "features " << forest.features.size() << '\n';
  for (const auto& f : forest.features) {
    if (f.categorical) {
      out << "feature categorical " << f.levels.size() << ' ';
      put_name(out, f.name);
      for (const auto& l : f.levels) {
        out << "level ";
        put_name(out, l);
      }
    } else {
      out << "feature numeric ";
      put_name(out, f.name);
    }
  }
  for (const Tree& t : forest.trees) {
    out << "tree " << t.nodes.size() << ' ' << t.members.size() << ' ' << t.bootstrap.size() << '\n';
    for (const TreeNode& n : t.nodes)
      out << "node " << static_cast<int>(n.kind) << ' ' << n.feature << ' ' << hex(n.cut) << ' ' << n.left << ' '
          << n.right << ' ' << hex(n.value) << ' ' << n.member_begin << ' ' << n.member_end << '\n';
    out << "members";
    for (int m : t.members) out << ' ' << m;
    out << "\nbootstrap";
    for (int b : t.bootstrap) out << ' ' << b;
    out << '\n';
  }
  out << "end\n";
}

Forest load_forest(std::istream& in) {
  Reader rd(in);
  Forest forest;
  {
    auto ss = rd.line("hrf-forest");
    if (Reader::get<int>(ss) != 1) throw ParseError("unsupported forest file version");
  }
  {
    auto ss = rd.line("task");
    const auto task = Reader::get<std::string>(ss);
    if (task != "regression" && task != "classification") throw ParseError("unknown task '" + task + "'");
    forest.config.task = task == "regression" ? Task::regression : Task::classification;
  }
  {
    auto ss = rd.line("config");
    auto& c = forest.config;
    c.n_trees = Reader::get<int>(ss);
    c.mtry = Reader::get<int>(ss);
    c.min_node_size = Reader::get<int>(ss);
    c.bootstrap = Reader::get<int>(ss) != 0;
    c.seed = Reader::get<std::uint64_t>(ss);
  }
  {
    auto ss = rd.line("n_train");
    forest.n_train = Reader::get<int>(ss);
  }
  {
    auto ss = rd.line("response");
    forest.response = Reader::rest(ss);
  }
  {
    auto ss = rd.line("classes");
    const auto k = Reader::get<std::size_t>(ss);
    for (std::size_t i = 0; i < k; ++i) {
      auto ls = rd.line("level");
      forest.classes.push_back(Reader::rest(ls));
    }
  }
  {
    auto ss = rd.line("features");
    const auto p = Reader::get<std::size_t>(ss);
    for (std::size_t i = 0; i < p; ++i) {
      auto fs = rd.line("feature");
      FeatureInfo f;
      const auto kind = Reader::get<std::string>(fs);
      std::size_t n_levels = 0;
      if (kind == "categorical") {
        f.categorical = true;
        n_levels = Reader::get<std::size_t>(fs);
      } else if (kind != "numeric") {
        throw ParseError("unknown feature kind '" + kind + "'");
      }
      f.name = Reader::rest(fs);
      for (std::size_t l = 0; l < n_levels; ++l) {
        auto ls = rd.line("level");
        f.levels.push_back(Reader::rest(ls));
      }
      forest.features.push_back(std::move(f));
    }
  }
  const int p = forest.n_features();
  for (int t = 0; t < forest.config.n_trees; ++t) {
    Tree tree;
    auto ts = rd.line("tree");
    const auto n_nodes = Reader::get<std::size_t>(ts);
    const auto n_members = Reader::get<std::size_t>(ts);
    const auto n_boot = Reader::get<std::size_t>(ts);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      auto ns = rd.line("node");
      TreeNode node;
      const int kind = Reader::get<int>(ns);
      if (kind < 0 || kind > 2) throw ParseError("bad node kind");
      node.kind = static_cast<SplitKind>(kind);
      node.feature = Reader::get<int>(ns);
      node.cut = unhex(Reader::get<std::string>(ns));
      node.left = Reader::get<int>(ns);
      node.right = Reader::get<int>(ns);
      node.value = unhex(Reader::get<std::string>(ns));
      node.member_begin = Reader::get<int>(ns);
      node.member_end = Reader::get<int>(ns);
      const auto limit = static_cast<int>(n_nodes);
      if (!node.is_leaf() && (node.feature < 0 || node.feature >= p || node.left <= 0 || node.left >= limit ||
                              node.right <= 0 || node.right >= limit))
        throw ParseError("node references out of range");
      if (node.is_leaf() && (node.member_begin < 0 || node.member_end < node.member_begin ||
                             node.member_end > static_cast<int>(n_members)))
        throw ParseError("leaf member range out of bounds");
      tree.nodes.push_back(node);
    }
    auto ms = rd.line("members");
    tree.members.resize(n_members);
    for (auto& m : tree.members) m = Reader::get<int>(ms);
    auto bs = rd.line("bootstrap");
    tree.bootstrap.resize(n_boot);
    for (auto& b : tree.bootstrap) b = Reader::get<int>(bs);
    forest.trees.push_back(std::move(tree));
  }
  rd.line("end");
  return forest;
}

}  // namespace hrf
