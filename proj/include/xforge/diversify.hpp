#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "xforge/backends.hpp"
#include "xforge/sample.hpp"

namespace xforge::diversify {

using backends::EmbeddingVector;

struct ClusterModel {
    std::size_t k = 0;
    std::vector<EmbeddingVector> centroids;
    /// Cluster index per input vector.
    std::vector<std::size_t> labels;
    double inertia = 0;
    std::size_t iterations_run = 0;
    /// Inertia after each assignment step, final assignment last.
    std::vector<double> inertia_trace;

    std::vector<std::size_t> cluster_sizes() const;
};

struct KMeansOptions {
    std::size_t max_iter = 100;
    double tol = 1e-6;
    /// Independent k-means++ starts; the lowest final inertia wins.
    std::size_t restarts = 1;
    /// After Lloyd converges, move single points between clusters while a
    /// move lowers inertia, then resume Lloyd. Escapes Lloyd fixed points
    /// that no k-means++ start avoids.
    bool hartigan = true;
    std::size_t workers = 1;
};

/// Squared Euclidean distance.
double sq_distance(const EmbeddingVector& a, const EmbeddingVector& b);

/// Lloyd's algorithm from a k-means++ start. Nearest-centroid ties go to the
/// lowest index; an emptied cluster is re-seeded with the point farthest from
/// its centroid. With `hartigan` set, single-point moves refine the Lloyd
/// result. Throws std::invalid_argument for k == 0, k > |vectors|,
/// ragged dimensions or non-finite components.
ClusterModel kmeans(const std::vector<EmbeddingVector>& vectors, std::size_t k, std::uint64_t rng_seed,
                    const KMeansOptions& opts = {});

/// Sum of squared distances from each point to the mean of its group. Used
/// to evaluate an arbitrary labelling.
double partition_inertia(const std::vector<EmbeddingVector>& vectors,
                         const std::vector<std::size_t>& labels, std::size_t k);

/// Quota floor(total/k) per cluster; shortfall from small clusters (and the
/// remainder of the division) goes round-robin by ascending cluster index to
/// clusters with spare members. Returns point indices in ascending order.
/// Throws std::invalid_argument when total exceeds the number of points.
std::vector<std::size_t> sample_per_cluster(const ClusterModel& model, std::size_t total,
                                            std::uint64_t rng_seed);

/// Per-cluster pick counts that sample_per_cluster will draw.
std::vector<std::size_t> cluster_quotas(const std::vector<std::size_t>& sizes, std::size_t total);

// ---------------------------------------------------------------------------
// Embedding cache and driver

/// Line-delimited {id, text_sha256, vector} records. Entries whose text hash
/// no longer matches are recomputed.
class EmbeddingCache {
public:
    EmbeddingCache() = default;
    explicit EmbeddingCache(std::filesystem::path path);

    std::optional<EmbeddingVector> find(const std::string& id, const std::string& text) const;
    void put(const std::string& id, const std::string& text, EmbeddingVector v);
    /// Rewrites the backing file, if any, in insertion order.
    void save() const;
    std::size_t size() const { return order_.size(); }

private:
    struct Entry {
        std::string text_sha;
        EmbeddingVector vector;
    };
    std::optional<std::filesystem::path> path_;
    std::unordered_map<std::string, Entry> entries_;
    std::vector<std::string> order_;
};

/// Embeds the English instruction of every sample, reusing cached vectors.
std::vector<EmbeddingVector> embed_instructions(const std::vector<XSample>& samples,
                                                backends::EmbeddingClient& embedder,
                                                EmbeddingCache& cache);

struct DiversifyOptions {
    std::size_t k = 1000;
    std::size_t total = 32000;
    std::uint64_t rng_seed = 0;
    bool normalize = false;
    KMeansOptions kmeans;
};

struct DiversifyResult {
    std::vector<XSample> selected;
    ClusterModel model;
    std::vector<std::size_t> per_cluster;
};

/// Clusters the pool's instructions and samples `total` of them evenly
/// across clusters. Output keeps pool order.
DiversifyResult diversify(const std::vector<XSample>& pool, backends::EmbeddingClient& embedder,
                          EmbeddingCache& cache, const DiversifyOptions& opts);

}  // namespace xforge::diversify
