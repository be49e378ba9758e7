#pragma once

#include "affdiff/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace affdiff {

/// Undirected agent graph. Every agent is implicitly its own neighbor.
///
/// Agents are indexed 0..N-1 internally; text formats use 1-based indices.
class Topology {
 public:
  /// Builds a topology from 0-based undirected edges. Throws ConfigError on
  /// out-of-range indices or an invalid cluster partition.
  Topology(int n_agents, const std::vector<std::pair<int, int>>& edges,
           std::vector<std::vector<int>> clusters = {});

  int size() const { return n_; }
  bool connected(int a, int b) const { return a == b || adj_(a, b) != 0; }
  /// Neighborhood N_k, including k itself, in increasing order.
  const std::vector<int>& neighbors(int k) const { return nbrs_[static_cast<size_t>(k)]; }
  /// |N_k| (self included).
  int degree(int k) const { return static_cast<int>(neighbors(k).size()); }
  std::vector<std::pair<int, int>> edges() const;

  bool has_clusters() const { return !clusters_.empty(); }
  const std::vector<std::vector<int>>& clusters() const { return clusters_; }
  /// Index of the cluster holding agent k. Requires clusters.
  int cluster_of(int k) const;

  /// Adjacency with unit diagonal.
  Mat adjacency() const;
  Mat laplacian() const;
  bool is_connected() const;

  /// Same graph with agents renamed: agent k becomes perm[k].
  Topology relabeled(const std::vector<int>& perm) const;

 private:
  int n_;
  Eigen::MatrixXi adj_;
  std::vector<std::vector<int>> nbrs_;
  std::vector<std::vector<int>> clusters_;
  std::vector<int> cluster_index_;
};

struct GraphStats {
  int size = 0;
  double density = 0.0;  ///< nonzero adjacency entries (self-loops included) over N^2
  double lambda2 = 0.0;  ///< algebraic connectivity of the unnormalized Laplacian
  int diameter = 0;
};

/// One of "net1", "net2", "net3". Throws ConfigError for anything else.
Topology build_preset(std::string_view name);

/// Throws DomainError for a disconnected graph.
GraphStats stats(const Topology& t);

/// Edge-list text: `u v` per line (1-based), `cluster <id>: <members>` lines,
/// `#` comments. The agent count is the largest index seen unless `n_agents`
/// is given.
Topology parse_edge_list(std::istream& in, std::optional<int> n_agents = std::nullopt);
Topology load_edge_list(const std::string& path);
void write_edge_list(std::ostream& out, const Topology& t);

enum class StaticRule { identity, averaging, uniform_in_cluster, metropolis };
StaticRule parse_static_rule(std::string_view name);

/// Left-stochastic combination matrix supported on the neighborhoods.
/// Entry (l, k) is the weight agent k assigns to neighbor l.
Mat static_rule(const Topology& t, StaticRule rule);

enum class StochasticRole { left, right };

struct StochasticReport {
  struct SumDeviation {
    int index;
    double deviation;  ///< sum - 1
  };
  struct Entry {
    int row;
    int col;
    double value;
  };

  bool dimensions_ok = true;
  double max_sum_deviation = 0.0;
  std::vector<SumDeviation> sum_violations;
  std::vector<Entry> negative_entries;
  std::vector<Entry> support_violations;
  bool doubly_stochastic = false;

  bool valid() const {
    return dimensions_ok && sum_violations.empty() && negative_entries.empty() &&
           support_violations.empty();
  }
};

/// Column sums (left role) or row sums (right role) must equal one within `tol`.
StochasticReport validate_stochastic(const Mat& m, const Topology& t,
                                     StochasticRole role = StochasticRole::left,
                                     double tol = 1e-12);

}  // namespace affdiff
