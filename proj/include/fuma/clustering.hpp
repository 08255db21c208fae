#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "fuma/error.hpp"
#include "fuma/matrix.hpp"
#include "fuma/parallel.hpp"
#include "fuma/rng.hpp"

namespace fuma {

/// A hard partition of the rows of a matrix into k non-empty clusters.
struct Clustering {
  std::size_t k = 0;
  Matrix centroids;                     // k x d, mean of assigned points
  std::vector<std::size_t> assignment;  // per row, in [0, k)
  double twcv = 0.0;                    // total within-cluster variation

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out(k, 0);
    for (auto c : assignment) ++out[c];
    return out;
  }

  friend bool operator==(const Clustering&, const Clustering&) = default;
};

struct GAParams {
  std::size_t population_size = 30;
  std::size_t generations = 100;
  double mutation_prob = 0.05;
  std::size_t elitism_count = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (population_size < 2) throw InvalidArgument("GA population_size must be >= 2");
    if (generations < 1) throw InvalidArgument("GA generations must be >= 1");
    if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) throw InvalidArgument("GA mutation_prob must be in [0,1]");
    if (elitism_count > population_size) throw InvalidArgument("GA elitism_count exceeds population");
  }
};

/// Best TWCV in the population after each generation.
struct GaTrace {
  std::vector<double> best_twcv;
};

inline Matrix cluster_means(const Matrix& x, std::span<const std::size_t> assignment, std::size_t k) {
  Matrix centroids(k, x.cols());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto c = centroids.row(assignment[i]);
    const auto r = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) c[j] += r[j];
    ++counts[assignment[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (auto& v : centroids.row(c)) v /= static_cast<double>(counts[c]);
  }
  return centroids;
}

inline double total_within_variation(const Matrix& x, std::span<const std::size_t> assignment,
                                     const Matrix& centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) s += squared_distance(x.row(i), centroids.row(assignment[i]));
  return s;
}

/// Builds a Clustering whose centroids are the means of the assigned points.
inline Clustering make_clustering(const Matrix& x, std::vector<std::size_t> assignment, std::size_t k) {
  Clustering c;
  c.k = k;
  c.centroids = cluster_means(x, assignment, k);
  c.twcv = total_within_variation(x, assignment, c.centroids);
  c.assignment = std::move(assignment);
  return c;
}

namespace detail {

using Chromosome = std::vector<std::size_t>;

// Fills empty clusters by moving, for each one, the point farthest from its
// own centroid (taken from clusters that keep at least one member).
inline void repair_empty_clusters(const Matrix& x, Chromosome& genes, std::size_t k) {
  while (true) {
    std::vector<std::size_t> counts(k, 0);
    for (auto g : genes) ++counts[g];
    const auto empty = std::find(counts.begin(), counts.end(), 0);
    if (empty == counts.end()) return;
    const Matrix centroids = cluster_means(x, genes, k);
    std::size_t far = genes.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < genes.size(); ++i) {
      if (counts[genes[i]] < 2) continue;
      const double d = squared_distance(x.row(i), centroids.row(genes[i]));
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == genes.size()) throw InvalidArgument("cannot fill empty cluster: too few points");
    genes[far] = static_cast<std::size_t>(empty - counts.begin());
  }
}

inline std::size_t nearest_centroid(std::span<const double> point, const Matrix& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(point, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

// One K-means operator pass: centroids from the current assignment, then
// every point moves to its nearest centroid. Returns true if any gene changed.
inline bool kmeans_pass(const Matrix& x, Chromosome& genes, std::size_t k) {
  repair_empty_clusters(x, genes, k);
  const Matrix centroids = cluster_means(x, genes, k);
  bool changed = false;
  for (std::size_t i = 0; i < genes.size(); ++i) {
    const auto c = nearest_centroid(x.row(i), centroids);
    if (c != genes[i]) {
      genes[i] = c;
      changed = true;
    }
  }
  repair_empty_clusters(x, genes, k);
  return changed;
}

inline double chromosome_twcv(const Matrix& x, const Chromosome& genes, std::size_t k) {
  return total_within_variation(x, genes, cluster_means(x, genes, k));
}

inline void polish(const Matrix& x, Chromosome& genes, std::size_t k, int max_iter = 300) {
  for (int it = 0; it < max_iter; ++it) {
    if (!kmeans_pass(x, genes, k)) return;
  }
}

inline Chromosome seed_from_random_centroids(const Matrix& x, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: first k entries become distinct random rows.
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  Matrix centroids(k, x.cols());
  for (std::size_t c = 0; c < k; ++c) {
    const auto r = x.row(idx[c]);
    std::copy(r.begin(), r.end(), centroids.row(c).begin());
  }
  Chromosome genes(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) genes[i] = nearest_centroid(x.row(i), centroids);
  // Each seed row owns its own cluster even when rows coincide.
  for (std::size_t c = 0; c < k; ++c) genes[idx[c]] = c;
  return genes;
}

inline void check_cluster_args(const Matrix& x, std::size_t k) {
  if (k < 2) throw InvalidArgument("k must be >= 2");
  if (x.rows() < k) throw InvalidArgument("need at least k rows");
}

}  // namespace detail

/// Genetic K-means: assignment-vector chromosomes (initially Lloyd local
/// optima) evolved by fitness-proportional selection, allele mutation and one K-means operator pass per
/// offspring, with the best `elitism_count` individuals carried over unchanged.
/// The winner is refined by K-means passes until it stops changing.
inline Clustering ga_kmeans(const Matrix& x, std::size_t k, const GAParams& params, GaTrace* trace = nullptr) {
  detail::check_cluster_args(x, k);
  params.validate();
  Rng rng(params.seed);
  const std::size_t pop = params.population_size;

  std::vector<detail::Chromosome> population(pop);
  std::vector<double> cost(pop);
  for (std::size_t p = 0; p < pop; ++p) {
    population[p] = detail::seed_from_random_centroids(x, k, rng);
    // Start from converged Lloyd solutions; with elitism the result is never
    // worse than a single Lloyd run from the same seed.
    detail::polish(x, population[p], k);
    cost[p] = detail::chromosome_twcv(x, population[p], k);
  }

  std::vector<std::size_t> order(pop);
  for (std::size_t gen = 0; gen < params.generations; ++gen) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cost[a] < cost[b]; });
    const double worst = cost[order.back()];
    std::vector<double> fitness(pop);
    const double eps = 1e-12 * std::max(1.0, worst);
    for (std::size_t p = 0; p < pop; ++p) fitness[p] = (worst - cost[p]) + eps;

    std::vector<detail::Chromosome> next;
    std::vector<double> next_cost;
    next.reserve(pop);
    next_cost.reserve(pop);
    for (std::size_t e = 0; e < params.elitism_count; ++e) {
      next.push_back(population[order[e]]);
      next_cost.push_back(cost[order[e]]);
    }
    while (next.size() < pop) {
      detail::Chromosome child = population[rng.weighted(fitness)];
      for (auto& g : child) {
        if (rng.bernoulli(params.mutation_prob)) g = rng.index(k);
      }
      detail::kmeans_pass(x, child, k);
      next_cost.push_back(detail::chromosome_twcv(x, child, k));
      next.push_back(std::move(child));
    }
    population = std::move(next);
    cost = std::move(next_cost);
    if (trace) trace->best_twcv.push_back(*std::min_element(cost.begin(), cost.end()));
  }

  const auto best = static_cast<std::size_t>(std::min_element(cost.begin(), cost.end()) - cost.begin());
  detail::Chromosome genes = population[best];
  detail::polish(x, genes, k);
  return make_clustering(x, std::move(genes), k);
}

/// Plain Lloyd iterations from k distinct random rows as starting centroids.
inline Clustering lloyd_kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iter = 300) {
  detail::check_cluster_args(x, k);
  Rng rng(seed);
  auto genes = detail::seed_from_random_centroids(x, k, rng);
  detail::polish(x, genes, k, max_iter);
  return make_clustering(x, std::move(genes), k);
}

namespace detail {

inline std::vector<double> pairwise_distances(const Matrix& x) {
  const std::size_t n = x.rows();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i * n + j] = d[j * n + i] = std::sqrt(squared_distance(x.row(i), x.row(j)));
    }
  }
  return d;
}

inline void check_index_args(const Matrix& x, const Clustering& c) {
  if (c.k < 2) throw InvalidArgument("validity index needs k >= 2");
  if (c.assignment.size() != x.rows()) throw InvalidArgument("assignment length mismatch");
}

}  // namespace detail

/// Mean silhouette width in [-1, 1]; points in singleton clusters score 0.
inline double silhouette(const Matrix& x, const Clustering& c) {
  detail::check_index_args(x, c);
  const std::size_t n = x.rows();
  const auto d = detail::pairwise_distances(x);
  const auto sizes = c.sizes();
  double total = 0.0;
  std::vector<double> sums(c.k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = c.assignment[i];
    if (sizes[own] < 2) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) sums[c.assignment[j]] += d[i * n + j];
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t other = 0; other < c.k; ++other) {
      if (other == own || sizes[other] == 0) continue;
      b = std::min(b, sums[other] / static_cast<double>(sizes[other]));
    }
    const double m = std::max(a, b);
    if (m > 0.0 && std::isfinite(b)) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

/// Calinski-Harabasz ratio; +infinity when n == k or SSW == 0 < SSB.
inline double calinski_harabasz(const Matrix& x, const Clustering& c) {
  detail::check_index_args(x, c);
  const std::size_t n = x.rows();
  if (n == c.k) return std::numeric_limits<double>::infinity();
  std::vector<double> grand(x.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) grand[j] += x(i, j);
  }
  for (auto& g : grand) g /= static_cast<double>(n);
  const Matrix centroids = cluster_means(x, c.assignment, c.k);
  const auto sizes = c.sizes();
  double ssb = 0.0;
  for (std::size_t k = 0; k < c.k; ++k) ssb += static_cast<double>(sizes[k]) * squared_distance(centroids.row(k), grand);
  const double ssw = total_within_variation(x, c.assignment, centroids);
  if (ssw == 0.0) return ssb > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return (ssb / static_cast<double>(c.k - 1)) / (ssw / static_cast<double>(n - c.k));
}

/// C-index in [0, 1]; lower is better. 0 when all pairwise distances coincide.
inline double c_index(const Matrix& x, const Clustering& c) {
  detail::check_index_args(x, c);
  const std::size_t n = x.rows();
  std::vector<double> all;
  all.reserve(n * (n - 1) / 2);
  double s = 0.0;
  std::size_t within = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::sqrt(squared_distance(x.row(i), x.row(j)));
      all.push_back(d);
      if (c.assignment[i] == c.assignment[j]) {
        s += d;
        ++within;
      }
    }
  }
  if (within == 0) return 0.0;
  std::sort(all.begin(), all.end());
  double s_min = 0.0;
  double s_max = 0.0;
  for (std::size_t i = 0; i < within; ++i) {
    s_min += all[i];
    s_max += all[all.size() - 1 - i];
  }
  if (s_max <= s_min) return 0.0;
  return std::clamp((s - s_min) / (s_max - s_min), 0.0, 1.0);
}

struct KScore {
  std::size_t k = 0;
  double silhouette = 0.0;
  double calinski_harabasz = 0.0;
  double c_index = 0.0;
  double twcv = 0.0;
};

struct KSelection {
  std::size_t best_k = 0;
  std::size_t vote_silhouette = 0;
  std::size_t vote_calinski_harabasz = 0;
  std::size_t vote_c_index = 0;
  std::vector<KScore> table;
  std::vector<Clustering> clusterings;  // parallel to table

  const Clustering& best() const {
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (table[i].k == best_k) return clusterings[i];
    }
    throw InvalidArgument("best k missing from table");
  }
};

/// Clusters once per k in [k_min, k_max] and takes a majority vote of the
/// three validity indices (silhouette max, CH max, C-index min); ties go to
/// the smallest k. The GA seed for each k is derived from params.seed.
inline KSelection select_k(const Matrix& x, std::size_t k_min, std::size_t k_max, const GAParams& params,
                           std::size_t jobs = 1) {
  if (k_min < 2) throw InvalidArgument("k range must start at 2 or above");
  if (k_max < k_min) throw InvalidArgument("empty k range");
  if (x.rows() < 2 || k_max > x.rows() - 1) throw InvalidArgument("k_max must be <= n - 1");
  const std::size_t count = k_max - k_min + 1;
  KSelection sel;
  sel.table.resize(count);
  sel.clusterings.resize(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    const std::size_t k = k_min + i;
    GAParams p = params;
    p.seed = derive_seed(params.seed, k);
    Clustering c = ga_kmeans(x, k, p);
    sel.table[i] = KScore{k, silhouette(x, c), calinski_harabasz(x, c), c_index(x, c), c.twcv};
    sel.clusterings[i] = std::move(c);
  });

  auto argbest = [&](auto better) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < count; ++i) {
      if (better(sel.table[i], sel.table[best])) best = i;
    }
    return sel.table[best].k;
  };
  sel.vote_silhouette = argbest([](const KScore& a, const KScore& b) { return a.silhouette > b.silhouette; });
  sel.vote_calinski_harabasz =
      argbest([](const KScore& a, const KScore& b) { return a.calinski_harabasz > b.calinski_harabasz; });
  sel.vote_c_index = argbest([](const KScore& a, const KScore& b) { return a.c_index < b.c_index; });

  std::size_t best_votes = 0;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    const std::size_t votes = (sel.vote_silhouette == k) + (sel.vote_calinski_harabasz == k) + (sel.vote_c_index == k);
    if (votes > best_votes) {
      best_votes = votes;
      sel.best_k = k;
    }
  }
  return sel;
}

}  // namespace fuma
