#include "affdiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>

#include "preset_topologies.inc"  // generated: kNet1Edges, kNet2Edges

namespace affdiff {

Topology::Topology(int n_agents, const std::vector<std::pair<int, int>>& edges,
                   std::vector<std::vector<int>> clusters)
    : n_(n_agents), clusters_(std::move(clusters)) {
  if (n_ < 1) throw ConfigError("topology needs at least one agent");
  adj_ = Eigen::MatrixXi::Zero(n_, n_);
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n_ || b >= n_)
      throw ConfigError("edge (" + std::to_string(a + 1) + ", " + std::to_string(b + 1) +
                        ") outside 1.." + std::to_string(n_));
    if (a == b) continue;
    adj_(a, b) = adj_(b, a) = 1;
  }
  nbrs_.resize(static_cast<size_t>(n_));
  for (int k = 0; k < n_; ++k)
    for (int l = 0; l < n_; ++l)
      if (l == k || adj_(l, k)) nbrs_[static_cast<size_t>(k)].push_back(l);

  if (!clusters_.empty()) {
    cluster_index_.assign(static_cast<size_t>(n_), -1);
    for (size_t c = 0; c < clusters_.size(); ++c) {
      for (int k : clusters_[c]) {
        if (k < 0 || k >= n_) throw ConfigError("cluster member outside agent range");
        if (cluster_index_[static_cast<size_t>(k)] != -1)
          throw ConfigError("agent " + std::to_string(k + 1) + " appears in two clusters");
        cluster_index_[static_cast<size_t>(k)] = static_cast<int>(c);
      }
    }
    for (int k = 0; k < n_; ++k)
      if (cluster_index_[static_cast<size_t>(k)] == -1)
        throw ConfigError("clusters do not cover agent " + std::to_string(k + 1));
  }
}

std::vector<std::pair<int, int>> Topology::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < n_; ++a)
    for (int b = a + 1; b < n_; ++b)
      if (adj_(a, b)) out.emplace_back(a, b);
  return out;
}

int Topology::cluster_of(int k) const {
  if (clusters_.empty()) throw ConfigError("topology has no cluster partition");
  return cluster_index_[static_cast<size_t>(k)];
}

Mat Topology::adjacency() const {
  Mat a = adj_.cast<double>();
  a.diagonal().setOnes();
  return a;
}

Mat Topology::laplacian() const {
  Mat a = adj_.cast<double>();
  Mat l = -a;
  l.diagonal() = a.rowwise().sum();
  return l;
}

bool Topology::is_connected() const {
  std::vector<char> seen(static_cast<size_t>(n_), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int k = stack.back();
    stack.pop_back();
    for (int l : neighbors(k))
      if (!seen[static_cast<size_t>(l)]) {
        seen[static_cast<size_t>(l)] = 1;
        ++count;
        stack.push_back(l);
      }
  }
  return count == n_;
}

Topology Topology::relabeled(const std::vector<int>& perm) const {
  if (static_cast<int>(perm.size()) != n_) throw ConfigError("permutation size mismatch");
  std::vector<std::pair<int, int>> e;
  for (auto [a, b] : edges()) e.emplace_back(perm[static_cast<size_t>(a)], perm[static_cast<size_t>(b)]);
  std::vector<std::vector<int>> cl = clusters_;
  for (auto& c : cl)
    for (int& k : c) k = perm[static_cast<size_t>(k)];
  return Topology(n_, e, std::move(cl));
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

Topology net3() {
  // Seven fully connected clusters (six of size 3, one of size 2) chained by
  // the edges 3-4, 6-7, ..., 18-19 (1-based).
  std::vector<std::vector<int>> clusters;
  for (int c = 0; c < 6; ++c) clusters.push_back({3 * c, 3 * c + 1, 3 * c + 2});
  clusters.push_back({18, 19});
  std::vector<std::pair<int, int>> edges;
  for (const auto& c : clusters)
    for (size_t i = 0; i < c.size(); ++i)
      for (size_t j = i + 1; j < c.size(); ++j) edges.emplace_back(c[i], c[j]);
  for (int c = 0; c < 6; ++c) edges.emplace_back(3 * c + 2, 3 * c + 3);
  return Topology(20, edges, std::move(clusters));
}

}  // namespace

Topology parse_edge_list(std::istream& in, std::optional<int> n_agents) {
  std::vector<std::pair<int, int>> edges;
  std::vector<std::pair<int, std::vector<int>>> clusters;
  int max_index = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    auto fail = [&](const std::string& what) {
      throw ConfigError("edge list line " + std::to_string(lineno) + ": " + what);
    };
    if (line.rfind("cluster", 0) == 0) {
      auto colon = line.find(':');
      if (colon == std::string::npos) fail("cluster line needs ':'");
      std::istringstream head(line.substr(7, colon - 7));
      int id = 0;
      if (!(head >> id)) fail("cluster id missing");
      std::istringstream body(line.substr(colon + 1));
      std::vector<int> members;
      int m = 0;
      while (body >> m) {
        if (m < 1) fail("agent indices are 1-based");
        members.push_back(m - 1);
        max_index = std::max(max_index, m);
      }
      if (!body.eof()) fail("bad cluster member");
      clusters.emplace_back(id, std::move(members));
      continue;
    }
    std::istringstream ls(line);
    int u = 0, v = 0;
    if (!(ls >> u >> v)) fail("expected 'u v'");
    std::string rest;
    if (ls >> rest) fail("trailing tokens");
    if (u < 1 || v < 1) fail("agent indices are 1-based");
    edges.emplace_back(u - 1, v - 1);
    max_index = std::max({max_index, u, v});
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::vector<int>> parts;
  for (auto& c : clusters) parts.push_back(std::move(c.second));
  int n = n_agents.value_or(max_index);
  if (n_agents && max_index > *n_agents) throw ConfigError("edge list references agent beyond N");
  return Topology(n, edges, std::move(parts));
}

Topology load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge list '" + path + "'");
  return parse_edge_list(in);
}

void write_edge_list(std::ostream& out, const Topology& t) {
  for (auto [a, b] : t.edges()) out << a + 1 << ' ' << b + 1 << '\n';
  for (size_t c = 0; c < t.clusters().size(); ++c) {
    out << "cluster " << c + 1 << ':';
    for (int k : t.clusters()[c]) out << ' ' << k + 1;
    out << '\n';
  }
}

Topology build_preset(std::string_view name) {
  if (name == "net1") {
    std::istringstream in{std::string(kNet1Edges)};
    return parse_edge_list(in, 10);
  }
  if (name == "net2") {
    std::istringstream in{std::string(kNet2Edges)};
    return parse_edge_list(in, 20);
  }
  if (name == "net3") return net3();
  throw ConfigError("unknown topology preset '" + std::string(name) + "'");
}

GraphStats stats(const Topology& t) {
  if (!t.is_connected()) throw DomainError("graph is disconnected; diameter undefined");
  const int n = t.size();
  GraphStats s;
  s.size = n;
  s.density = t.adjacency().sum() / (static_cast<double>(n) * n);
  if (n >= 2) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(t.laplacian(), Eigen::EigenvaluesOnly);
    s.lambda2 = eig.eigenvalues()(1);
  }
  int diam = 0;
  for (int src = 0; src < n; ++src) {
    std::vector<int> dist(static_cast<size_t>(n), -1);
    std::queue<int> q;
    dist[static_cast<size_t>(src)] = 0;
    q.push(src);
    while (!q.empty()) {
      int k = q.front();
      q.pop();
      for (int l : t.neighbors(k))
        if (dist[static_cast<size_t>(l)] < 0) {
          dist[static_cast<size_t>(l)] = dist[static_cast<size_t>(k)] + 1;
          q.push(l);
        }
    }
    diam = std::max(diam, *std::max_element(dist.begin(), dist.end()));
  }
  s.diameter = diam;
  return s;
}

StaticRule parse_static_rule(std::string_view name) {
  if (name == "identity") return StaticRule::identity;
  if (name == "averaging") return StaticRule::averaging;
  if (name == "uniform_in_cluster") return StaticRule::uniform_in_cluster;
  if (name == "metropolis") return StaticRule::metropolis;
  throw ConfigError("unknown combination rule '" + std::string(name) + "'");
}

Mat static_rule(const Topology& t, StaticRule rule) {
  const int n = t.size();
  Mat a = Mat::Zero(n, n);
  switch (rule) {
    case StaticRule::identity:
      a.setIdentity();
      break;
    case StaticRule::averaging:
      for (int k = 0; k < n; ++k)
        for (int l : t.neighbors(k)) a(l, k) = 1.0 / t.degree(k);
      break;
    case StaticRule::uniform_in_cluster: {
      if (!t.has_clusters()) throw ConfigError("uniform_in_cluster rule needs a cluster partition");
      for (int k = 0; k < n; ++k) {
        std::vector<int> in;
        for (int l : t.neighbors(k))
          if (t.cluster_of(l) == t.cluster_of(k)) in.push_back(l);
        for (int l : in) a(l, k) = 1.0 / static_cast<double>(in.size());
      }
      break;
    }
    case StaticRule::metropolis:
      // Neighborhood sizes include the agent itself, so a_kk > 0.
      for (int k = 0; k < n; ++k) {
        double off = 0.0;
        for (int l : t.neighbors(k)) {
          if (l == k) continue;
          a(l, k) = 1.0 / std::max(t.degree(l), t.degree(k));
          off += a(l, k);
        }
        a(k, k) = 1.0 - off;
      }
      break;
  }
  return a;
}

StochasticReport validate_stochastic(const Mat& m, const Topology& t, StochasticRole role,
                                     double tol) {
  StochasticReport r;
  const int n = t.size();
  if (m.rows() != n || m.cols() != n) {
    r.dimensions_ok = false;
    return r;
  }
  Vec sums = role == StochasticRole::left ? Vec(m.colwise().sum().transpose())
                                          : Vec(m.rowwise().sum());
  for (int i = 0; i < n; ++i) {
    double dev = sums(i) - 1.0;
    r.max_sum_deviation = std::max(r.max_sum_deviation, std::abs(dev));
    if (std::abs(dev) > tol) r.sum_violations.push_back({i, dev});
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (m(i, j) < 0.0) r.negative_entries.push_back({i, j, m(i, j)});
      if (m(i, j) != 0.0 && !t.connected(i, j)) r.support_violations.push_back({i, j, m(i, j)});
    }
  Vec other = role == StochasticRole::left ? Vec(m.rowwise().sum())
                                           : Vec(m.colwise().sum().transpose());
  r.doubly_stochastic =
      r.valid() && ((other.array() - 1.0).abs() <= tol).all();
  return r;
}

}  // namespace affdiff
