#include "xforge/diversify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "xforge/hash.hpp"
#include "xforge/log.hpp"
#include "xforge/parallel.hpp"
#include "xforge/random.hpp"

namespace xforge::diversify {

std::vector<std::size_t> ClusterModel::cluster_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (auto l : labels) ++sizes[l];
    return sizes;
}

double sq_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

namespace {

void validate_vectors(const std::vector<EmbeddingVector>& vectors) {
    if (vectors.empty()) throw std::invalid_argument("kmeans: no vectors");
    const std::size_t dim = vectors.front().size();
    if (dim == 0) throw std::invalid_argument("kmeans: zero-dimensional vectors");
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].size() != dim)
            throw std::invalid_argument("kmeans: vector " + std::to_string(i) + " has dimension " +
                                        std::to_string(vectors[i].size()) + ", expected " +
                                        std::to_string(dim));
        for (double x : vectors[i])
            if (!std::isfinite(x))
                throw std::invalid_argument("kmeans: vector " + std::to_string(i) +
                                            " has a non-finite component");
    }
}

std::vector<EmbeddingVector> plus_plus_init(const std::vector<EmbeddingVector>& pts, std::size_t k,
                                            Rng& rng) {
    const std::size_t n = pts.size();
    std::vector<EmbeddingVector> centers;
    std::vector<char> chosen(n, 0);
    std::size_t first = rng.index(n);
    centers.push_back(pts[first]);
    chosen[first] = 1;

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq_distance(pts[i], centers[0]);

    while (centers.size() < k) {
        double sum = 0;
        for (double d : d2) sum += d;
        std::size_t pick = n;
        if (sum > 0) {
            const double target = rng.uniform() * sum;
            double acc = 0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (d2[i] > 0 && target < acc) {
                    pick = i;
                    break;
                }
            }
            if (pick == n)  // rounding at the top end
                for (std::size_t i = n; i-- > 0;)
                    if (d2[i] > 0) {
                        pick = i;
                        break;
                    }
        } else {
            // Only duplicates left: take an unused point uniformly.
            std::vector<std::size_t> unused;
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) unused.push_back(i);
            pick = unused[rng.index(unused.size())];
        }
        chosen[pick] = 1;
        centers.push_back(pts[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_distance(pts[i], centers.back()));
    }
    return centers;
}

struct Assignment {
    std::vector<std::size_t> labels;
    std::vector<double> dist;
};

void assign(const std::vector<EmbeddingVector>& pts, const std::vector<EmbeddingVector>& centers,
            Assignment& a, std::size_t workers) {
    parallel_for(pts.size(), workers, [&](std::size_t i) {
        std::size_t best = 0;
        double best_d = sq_distance(pts[i], centers[0]);
        for (std::size_t c = 1; c < centers.size(); ++c) {
            const double d = sq_distance(pts[i], centers[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        a.labels[i] = best;
        a.dist[i] = best_d;
    });
}

/// Gives every empty cluster the point farthest from its current centroid,
/// taken from a cluster that can spare it.
void repair_empty(const std::vector<EmbeddingVector>& pts, std::vector<EmbeddingVector>& centers,
                  Assignment& a) {
    std::vector<std::size_t> sizes(centers.size(), 0);
    for (auto l : a.labels) ++sizes[l];
    for (std::size_t c = 0; c < centers.size(); ++c) {
        if (sizes[c] > 0) continue;
        std::size_t far = pts.size();
        double far_d = -1;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (sizes[a.labels[i]] < 2) continue;
            if (a.dist[i] > far_d) {
                far_d = a.dist[i];
                far = i;
            }
        }
        if (far == pts.size()) throw std::logic_error("kmeans: cannot repair an empty cluster");
        --sizes[a.labels[far]];
        ++sizes[c];
        a.labels[far] = c;
        a.dist[far] = 0;
        centers[c] = pts[far];
    }
}

double total(const std::vector<double>& xs) {
    double s = 0;
    for (double x : xs) s += x;
    return s;
}

std::vector<EmbeddingVector> means_of(const std::vector<EmbeddingVector>& pts,
                                     const std::vector<std::size_t>& labels, std::size_t k,
                                     std::vector<std::size_t>& counts) {
    const std::size_t dim = pts.front().size();
    std::vector<EmbeddingVector> sums(k, EmbeddingVector(dim, 0.0));
    counts.assign(k, 0);
    // Accumulated in ascending point order for reproducible bits.
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto& s = sums[labels[i]];
        for (std::size_t d = 0; d < dim; ++d) s[d] += pts[i][d];
        ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c)
        for (double& x : sums[c]) x /= static_cast<double>(counts[c]);
    return sums;
}

/// One sweep of single-point moves. Moving x from a (size na) to b (size nb)
/// changes inertia by nb/(nb+1)|x-mb|^2 - na/(na-1)|x-ma|^2. Returns whether
/// any point moved; `centers` ends as the exact means of `labels`.
bool hartigan_sweep(const std::vector<EmbeddingVector>& pts, std::size_t k, std::vector<std::size_t>& labels,
                    std::vector<EmbeddingVector>& centers) {
    std::vector<std::size_t> counts;
    auto means = means_of(pts, labels, k, counts);
    bool moved = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::size_t from = labels[i];
        if (counts[from] < 2) continue;
        const double na = static_cast<double>(counts[from]);
        const double remove = na / (na - 1) * sq_distance(pts[i], means[from]);
        std::size_t to = from;
        double best = remove - 1e-12 * (1 + remove);
        for (std::size_t c = 0; c < k; ++c) {
            if (c == from) continue;
            const double nb = static_cast<double>(counts[c]);
            const double add = nb / (nb + 1) * sq_distance(pts[i], means[c]);
            if (add < best) {
                best = add;
                to = c;
            }
        }
        if (to == from) continue;
        const double nb = static_cast<double>(counts[to]);
        for (std::size_t d = 0; d < pts[i].size(); ++d) {
            means[from][d] = (means[from][d] * na - pts[i][d]) / (na - 1);
            means[to][d] = (means[to][d] * nb + pts[i][d]) / (nb + 1);
        }
        --counts[from];
        ++counts[to];
        labels[i] = to;
        moved = true;
    }
    centers = means_of(pts, labels, k, counts);
    return moved;
}

ClusterModel lloyd(const std::vector<EmbeddingVector>& pts, std::size_t k, std::uint64_t seed,
                   const KMeansOptions& opts) {
    const std::size_t n = pts.size();
    Rng rng(seed);

    ClusterModel m;
    m.k = k;
    m.centroids = plus_plus_init(pts, k, rng);
    Assignment a{std::vector<std::size_t>(n), std::vector<double>(n)};
    std::vector<std::size_t> counts;

    std::size_t it = 0;
    auto lloyd_phase = [&] {
        while (it < opts.max_iter) {
            assign(pts, m.centroids, a, opts.workers);
            repair_empty(pts, m.centroids, a);
            m.inertia_trace.push_back(total(a.dist));
            auto next = means_of(pts, a.labels, k, counts);
            double shift = 0;
            for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(sq_distance(next[c], m.centroids[c])));
            m.centroids = std::move(next);
            m.iterations_run = ++it;
            if (shift <= opts.tol) break;
        }
        assign(pts, m.centroids, a, opts.workers);
        repair_empty(pts, m.centroids, a);
    };

    lloyd_phase();
    if (opts.hartigan) {
        for (std::size_t round = 0; round < opts.max_iter; ++round) {
            if (!hartigan_sweep(pts, k, a.labels, m.centroids)) break;
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += sq_distance(pts[i], m.centroids[a.labels[i]]);
            m.inertia_trace.push_back(s);
            lloyd_phase();
        }
    }

    m.inertia = total(a.dist);
    m.inertia_trace.push_back(m.inertia);
    m.labels = std::move(a.labels);
    return m;
}

}  // namespace

ClusterModel kmeans(const std::vector<EmbeddingVector>& vectors, std::size_t k, std::uint64_t rng_seed,
                    const KMeansOptions& opts) {
    if (k == 0) throw std::invalid_argument("kmeans: k must be >= 1");
    if (k > vectors.size())
        throw std::invalid_argument("kmeans: k = " + std::to_string(k) + " exceeds " +
                                    std::to_string(vectors.size()) + " vectors");
    validate_vectors(vectors);

    const std::size_t restarts = std::max<std::size_t>(1, opts.restarts);
    std::optional<ClusterModel> best;
    for (std::size_t r = 0; r < restarts; ++r) {
        auto m = lloyd(vectors, k, derive_seed(rng_seed, static_cast<std::uint64_t>(r)), opts);
        if (!best || m.inertia < best->inertia) best = std::move(m);
    }
    return std::move(*best);
}

double partition_inertia(const std::vector<EmbeddingVector>& vectors,
                         const std::vector<std::size_t>& labels, std::size_t k) {
    if (vectors.size() != labels.size())
        throw std::invalid_argument("partition_inertia: label count mismatch");
    const std::size_t dim = vectors.empty() ? 0 : vectors.front().size();
    std::vector<EmbeddingVector> means(k, EmbeddingVector(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        for (std::size_t d = 0; d < dim; ++d) means[labels[i]][d] += vectors[i][d];
        ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c)
        if (counts[c])
            for (double& x : means[c]) x /= static_cast<double>(counts[c]);
    double s = 0;
    for (std::size_t i = 0; i < vectors.size(); ++i) s += sq_distance(vectors[i], means[labels[i]]);
    return s;
}

std::vector<std::size_t> cluster_quotas(const std::vector<std::size_t>& sizes, std::size_t total) {
    std::size_t population = 0;
    for (auto s : sizes) population += s;
    if (total > population)
        throw std::invalid_argument("sample_per_cluster: total " + std::to_string(total) +
                                    " exceeds population " + std::to_string(population));
    std::vector<std::size_t> take(sizes.size(), 0);
    if (total == 0 || sizes.empty()) return take;

    const std::size_t quota = total / sizes.size();
    std::size_t remaining = total;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        take[c] = std::min(quota, sizes[c]);
        remaining -= take[c];
    }
    while (remaining > 0) {
        for (std::size_t c = 0; c < sizes.size() && remaining > 0; ++c) {
            if (take[c] < sizes[c]) {
                ++take[c];
                --remaining;
            }
        }
    }
    return take;
}

std::vector<std::size_t> sample_per_cluster(const ClusterModel& model, std::size_t total,
                                            std::uint64_t rng_seed) {
    std::vector<std::vector<std::size_t>> members(model.k);
    for (std::size_t i = 0; i < model.labels.size(); ++i) {
        if (model.labels[i] >= model.k) throw std::invalid_argument("sample_per_cluster: label out of range");
        members[model.labels[i]].push_back(i);
    }
    std::vector<std::size_t> sizes(model.k);
    for (std::size_t c = 0; c < model.k; ++c) sizes[c] = members[c].size();
    const auto take = cluster_quotas(sizes, total);

    std::vector<std::size_t> out;
    out.reserve(total);
    for (std::size_t c = 0; c < model.k; ++c) {
        if (take[c] == 0) continue;
        Rng rng(derive_seed(rng_seed, static_cast<std::uint64_t>(c)));
        for (auto j : rng.sample_indices(members[c].size(), take[c])) out.push_back(members[c][j]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(*path_)) return;
    const auto stats = read_jsonl(*path_, [&](const json& rec) {
        const auto id = rec.at("id").get<std::string>();
        auto [it, inserted] = entries_.try_emplace(id);
        if (inserted) order_.push_back(id);
        it->second = {rec.at("text_sha256").get<std::string>(), rec.at("vector").get<EmbeddingVector>()};
        return true;
    });
    if (stats.malformed) log::warn("embedding cache: skipped " + std::to_string(stats.malformed) + " malformed lines");
}

std::optional<EmbeddingVector> EmbeddingCache::find(const std::string& id, const std::string& text) const {
    const auto it = entries_.find(id);
    if (it == entries_.end() || it->second.text_sha != sha256_hex(text)) return std::nullopt;
    return it->second.vector;
}

void EmbeddingCache::put(const std::string& id, const std::string& text, EmbeddingVector v) {
    auto [it, inserted] = entries_.try_emplace(id);
    if (inserted) order_.push_back(id);
    it->second = {sha256_hex(text), std::move(v)};
}

void EmbeddingCache::save() const {
    if (!path_) return;
    std::vector<json> records;
    records.reserve(order_.size());
    for (const auto& id : order_) {
        const auto& e = entries_.at(id);
        records.push_back(json{{"id", id}, {"text_sha256", e.text_sha}, {"vector", e.vector}});
    }
    write_jsonl(*path_, records);
}

std::vector<EmbeddingVector> embed_instructions(const std::vector<XSample>& samples,
                                                backends::EmbeddingClient& embedder,
                                                EmbeddingCache& cache) {
    std::vector<EmbeddingVector> out(samples.size());
    std::vector<std::size_t> missing;
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (auto hit = cache.find(samples[i].id, samples[i].instruction_en)) {
            out[i] = std::move(*hit);
        } else {
            missing.push_back(i);
            texts.push_back(samples[i].instruction_en);
        }
    }
    if (!texts.empty()) {
        auto fresh = embedder.embed(texts);
        for (std::size_t j = 0; j < missing.size(); ++j) {
            cache.put(samples[missing[j]].id, texts[j], fresh[j]);
            out[missing[j]] = std::move(fresh[j]);
        }
        cache.save();
    }
    return out;
}

DiversifyResult diversify(const std::vector<XSample>& pool, backends::EmbeddingClient& embedder,
                          EmbeddingCache& cache, const DiversifyOptions& opts) {
    if (opts.total > pool.size())
        throw std::invalid_argument("diversify: total " + std::to_string(opts.total) +
                                    " exceeds pool of " + std::to_string(pool.size()));
    if (opts.k > pool.size())
        throw std::invalid_argument("diversify: k " + std::to_string(opts.k) + " exceeds pool of " +
                                    std::to_string(pool.size()));

    auto vectors = embed_instructions(pool, embedder, cache);
    if (opts.normalize) {
        for (auto& v : vectors) {
            double norm = 0;
            for (double x : v) norm += x * x;
            if (norm > 0)
                for (double& x : v) x /= std::sqrt(norm);
        }
    }

    DiversifyResult result;
    result.model = kmeans(vectors, opts.k, derive_seed(opts.rng_seed, "kmeans"), opts.kmeans);
    const auto picks = sample_per_cluster(result.model, opts.total, derive_seed(opts.rng_seed, "sample"));
    result.per_cluster.assign(opts.k, 0);
    result.selected.reserve(picks.size());
    for (auto i : picks) {
        result.selected.push_back(pool[i]);
        ++result.per_cluster[result.model.labels[i]];
    }
    return result;
}

}  // namespace xforge::diversify
