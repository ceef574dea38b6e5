#include "xforge/refinement.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

#include "xforge/log.hpp"
#include "xforge/parallel.hpp"
#include "xforge/random.hpp"
#include "xforge/templates.hpp"
#include "xforge/text.hpp"

namespace xforge::refinement {

namespace fs = std::filesystem;
using generation::Candidate;
using generation::FineTuneRecord;

// ---------------------------------------------------------------------------
// Segmentation

namespace {

struct CodePoint {
    char32_t cp;
    std::size_t offset;
};

std::vector<CodePoint> decode_with_offsets(std::string_view s) {
    std::vector<CodePoint> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto lead = static_cast<unsigned char>(s[i]);
        std::size_t len = 1;
        if ((lead & 0xE0) == 0xC0)
            len = 2;
        else if ((lead & 0xF0) == 0xE0)
            len = 3;
        else if ((lead & 0xF8) == 0xF0)
            len = 4;
        if (i + len > s.size()) len = 1;
        const auto cps = text::decode_utf8(s.substr(i, len));
        out.push_back({cps.empty() ? char32_t{0xFFFD} : cps.front(), i});
        i += len;
    }
    return out;
}

bool is_ws(char32_t c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

bool is_terminator(char32_t c) {
    switch (c) {
        case '.': case '!': case '?':
        case 0x0964: case 0x0965:  // Devanagari danda, double danda
        case 0x06D4: case 0x061F:  // Arabic-script full stop, question mark
        case 0x3002: case 0xFF01: case 0xFF1F:
            return true;
        default:
            return false;
    }
}

bool blank(std::string_view s) { return text::trim(s).empty(); }

bool ends_with_space(std::string_view s) { return !s.empty() && blank(s.substr(s.size() - 1)); }

}  // namespace

std::vector<Segment> segment(std::string_view body, std::size_t fallback_width) {
    const auto cps = decode_with_offsets(body);
    const std::size_t n = cps.size();
    auto offset_at = [&](std::size_t i) { return i < n ? cps[i].offset : body.size(); };

    std::vector<Segment> segs;
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < n) {
        const char32_t c = cps[i].cp;
        bool boundary = false;
        std::size_t j = i + 1;
        if (c == '\n') {
            boundary = true;
        } else if (is_terminator(c)) {
            while (j < n && is_terminator(cps[j].cp)) ++j;
            // An ASCII period only ends a sentence before whitespace or end of text,
            // which keeps decimals and URLs intact.
            boundary = j >= n || is_ws(cps[j].cp) || cps[j].cp == '\n' || c != '.';
        }
        if (!boundary) {
            ++i;
            continue;
        }
        while (j < n && (is_ws(cps[j].cp) || cps[j].cp == '\n')) ++j;
        segs.push_back({offset_at(start), offset_at(j)});
        start = j;
        i = j;
    }
    if (start < n) segs.push_back({offset_at(start), body.size()});

    // Fold whitespace-only pieces into a neighbour.
    std::vector<Segment> merged;
    std::optional<std::size_t> pending_begin;
    for (const auto& s : segs) {
        if (blank(body.substr(s.begin, s.end - s.begin))) {
            if (!merged.empty()) merged.back().end = s.end;
            else if (!pending_begin) pending_begin = s.begin;
            continue;
        }
        merged.push_back({pending_begin.value_or(s.begin), s.end});
        pending_begin.reset();
    }

    if (merged.size() >= 2 || fallback_width == 0 || n <= fallback_width) return merged;

    // Fixed-width fallback for text without usable sentence boundaries.
    std::vector<Segment> spans;
    for (std::size_t k = 0; k < n; k += fallback_width) {
        const std::size_t end = std::min(n, k + fallback_width);
        spans.push_back({offset_at(k), offset_at(end)});
    }
    std::vector<Segment> out;
    for (const auto& s : spans) {
        if (blank(body.substr(s.begin, s.end - s.begin)) && !out.empty()) {
            out.back().end = s.end;
            continue;
        }
        out.push_back(s);
    }
    return out;
}

std::string corrupt_delete(std::string_view response, std::uint64_t rng_seed) {
    const auto segs = segment(response);
    const std::size_t n = segs.size();
    if (n < 2) throw NotCorruptible("response has a single segment");
    // ceil(0.4 n) computed exactly, and always leave one segment.
    std::size_t max_remove = std::max<std::size_t>(1, (2 * n + 4) / 5);
    max_remove = std::min(max_remove, n - 1);

    Rng rng(derive_seed(rng_seed, "delete"));
    const std::size_t count = 1 + rng.index(max_remove);
    const std::size_t first = rng.index(n - count + 1);

    std::string out(response.substr(0, segs[first].begin));
    out.append(response.substr(segs[first + count - 1].end));
    // Dropping the last segment would otherwise leave the separator behind.
    if (!ends_with_space(response))
        while (ends_with_space(out)) out.pop_back();
    return out;
}

std::string corrupt_duplicate(std::string_view response, std::uint64_t rng_seed) {
    const auto segs = segment(response);
    if (segs.empty()) throw std::invalid_argument("corrupt_duplicate: empty response");
    Rng rng(derive_seed(rng_seed, "duplicate"));
    const std::size_t i = rng.index(segs.size());
    const auto piece = response.substr(segs[i].begin, segs[i].end - segs[i].begin);
    const bool last = i + 1 == segs.size();

    std::string out(response.substr(0, segs[i].end));
    if (last && !ends_with_space(piece)) out.push_back(' ');
    out.append(piece);
    out.append(response.substr(segs[i].end));
    return out;
}

// ---------------------------------------------------------------------------
// Rating triples

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::vanilla: return "vanilla";
        case Provenance::mismatched: return "mismatched";
        case Provenance::deleted: return "deleted";
        case Provenance::duplicated: return "duplicated";
        case Provenance::model_output: return "model_output";
    }
    return "vanilla";
}

Provenance provenance_from_string(std::string_view s) {
    if (s == "vanilla") return Provenance::vanilla;
    if (s == "mismatched") return Provenance::mismatched;
    if (s == "deleted") return Provenance::deleted;
    if (s == "duplicated") return Provenance::duplicated;
    if (s == "model_output") return Provenance::model_output;
    throw std::invalid_argument("unknown provenance '" + std::string(s) + "'");
}

int score_for(Provenance p) {
    switch (p) {
        case Provenance::vanilla: return 2;
        case Provenance::mismatched: return 0;
        default: return 1;
    }
}

void to_json(json& j, const RatingTriple& t) {
    j = json{{"instruction_en", t.instruction_en},
             {"response", t.response},
             {"score", t.score},
             {"provenance", to_string(t.provenance)},
             {"source_sample_id", t.source_sample_id},
             {"lang", t.lang}};
}

void from_json(const json& j, RatingTriple& t) {
    t.instruction_en = j.at("instruction_en").get<std::string>();
    t.response = j.at("response").get<std::string>();
    t.provenance = provenance_from_string(j.at("provenance").get<std::string>());
    t.score = j.at("score").get<int>();
    if (t.score != score_for(t.provenance))
        throw std::invalid_argument("rating triple score does not match its provenance");
    t.source_sample_id = j.at("source_sample_id").get<std::string>();
    t.lang = j.at("lang").get<LanguageCode>();
}

backends::InferenceRequest follower_request(const LanguageCode& lang, std::string_view instruction,
                                            const backends::Sampling& sampling) {
    backends::InferenceRequest req;
    req.system_prompt = templates::with_language(templates::kFollowerSeedSystem, lang);
    req.user_prompt = std::string(instruction);
    req.sampling = sampling;
    return req;
}

namespace {

/// Deletion, falling back to duplication for single-segment responses.
std::pair<std::string, Provenance> structural_flaw(const std::string& vanilla, Provenance wanted,
                                                   std::uint64_t seed) {
    if (wanted == Provenance::deleted) {
        try {
            return {corrupt_delete(vanilla, seed), Provenance::deleted};
        } catch (const NotCorruptible&) {
        }
    }
    return {corrupt_duplicate(vanilla, seed), Provenance::duplicated};
}

}  // namespace

std::vector<RatingTriple> synth_rating_set(const std::vector<XSample>& source,
                                           backends::ChatClient* follower, std::uint64_t rng_seed,
                                           const RatingSynthesisOptions& opts) {
    const std::size_t n = source.size();
    if (n < 2) throw std::invalid_argument("synth_rating_set: need at least two source samples");

    FlawMixture mix = opts.mixture.value_or(follower ? FlawMixture::with_follower()
                                                     : FlawMixture::without_follower());
    if (!follower) mix.model_output = 0;
    const double total_weight = mix.deleted + mix.duplicated + mix.model_output;
    if (!(total_weight > 0)) throw std::invalid_argument("synth_rating_set: empty flaw mixture");

    struct Plan {
        std::size_t partner = 0;
        Provenance flaw = Provenance::deleted;
        std::uint64_t corruption_seed = 0;
        std::string model_reply;
    };
    std::vector<Plan> plans(n);

    for (std::size_t j = 0; j < n; ++j) {
        Rng rng(derive_seed(rng_seed, source[j].id));
        const auto& vanilla = source[j].output;

        // Mismatched partner: uniform over other samples with a different output.
        std::optional<std::size_t> partner;
        for (int attempt = 0; attempt < 32 && !partner; ++attempt) {
            std::size_t m = rng.index(n - 1);
            if (m >= j) ++m;
            if (source[m].output != vanilla) partner = m;
        }
        if (!partner) {
            std::vector<std::size_t> pool;
            for (std::size_t m = 0; m < n; ++m)
                if (m != j && source[m].output != vanilla) pool.push_back(m);
            if (pool.empty())
                throw std::invalid_argument("synth_rating_set: sample " + source[j].id +
                                            " has no partner with a different output");
            partner = pool[rng.index(pool.size())];
        }
        plans[j].partner = *partner;

        const double u = rng.uniform() * total_weight;
        if (u < mix.deleted)
            plans[j].flaw = Provenance::deleted;
        else if (u < mix.deleted + mix.duplicated)
            plans[j].flaw = Provenance::duplicated;
        else
            plans[j].flaw = Provenance::model_output;
        plans[j].corruption_seed = rng.next();
    }

    if (follower) {
        std::vector<std::size_t> wanted;
        for (std::size_t j = 0; j < n; ++j)
            if (plans[j].flaw == Provenance::model_output) wanted.push_back(j);
        const std::size_t workers = opts.workers ? opts.workers : follower->policy().max_in_flight;
        parallel_for(wanted.size(), workers, [&](std::size_t w) {
            const auto j = wanted[w];
            try {
                plans[j].model_reply = std::string(text::trim(follower->complete(
                    follower_request(source[j].lang, source[j].instruction_en, opts.follower_sampling))));
            } catch (const backends::BackendError& e) {
                log::warn("rating synthesis: follower failed for " + source[j].id + ": " + e.what());
            }
        });
    }

    std::vector<RatingTriple> out;
    out.reserve(3 * n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& s = source[j];
        const auto& plan = plans[j];
        out.push_back({s.instruction_en, s.output, 2, Provenance::vanilla, s.id, s.lang});
        out.push_back({s.instruction_en, source[plan.partner].output, 0, Provenance::mismatched, s.id,
                       s.lang});

        std::string flawed;
        Provenance prov = plan.flaw;
        if (prov == Provenance::model_output && !plan.model_reply.empty() &&
            plan.model_reply != s.output) {
            flawed = plan.model_reply;
        } else {
            const Provenance structural =
                prov == Provenance::duplicated ? Provenance::duplicated : Provenance::deleted;
            std::tie(flawed, prov) = structural_flaw(s.output, structural, plan.corruption_seed);
        }
        out.push_back({s.instruction_en, std::move(flawed), 1, prov, s.id, s.lang});
    }
    return out;
}

backends::InferenceRequest evaluator_request(const LanguageCode& lang, std::string_view instruction,
                                             std::string_view response) {
    backends::InferenceRequest req;
    req.system_prompt = templates::with_language(templates::kEvaluatorSystem, lang);
    req.user_prompt = text::render(templates::kEvaluatorUser, {{"instruction", std::string(instruction)},
                                                               {"response", std::string(response)}});
    req.sampling = backends::Sampling{1.0, 0.0, 4};
    return req;
}

std::vector<FineTuneRecord> export_evaluator_train(const std::vector<RatingTriple>& triples) {
    if (triples.empty()) throw std::invalid_argument("export_evaluator_train: no triples");
    std::vector<FineTuneRecord> out;
    out.reserve(triples.size());
    for (const auto& t : triples) {
        const auto req = evaluator_request(t.lang, t.instruction_en, t.response);
        out.push_back({t.source_sample_id + "#" + std::to_string(t.score), req.system_prompt,
                       req.user_prompt, std::to_string(t.score), generation::Purpose::evaluator});
    }
    return out;
}

std::vector<FineTuneRecord> export_follower_train(const std::vector<XSample>& dx) {
    std::vector<FineTuneRecord> out;
    out.reserve(dx.size());
    for (const auto& s : dx) {
        const auto tmpl = s.is_seed() ? templates::kFollowerSeedSystem : templates::kFollowerMinedSystem;
        out.push_back({s.id, templates::with_language(tmpl, s.lang), s.instruction_en, s.output,
                       generation::Purpose::x_follower});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scoring and selection

std::optional<int> parse_rating(std::string_view reply) {
    const auto t = text::trim(reply);
    if (t.size() != 1) return std::nullopt;
    if (t[0] < '0' || t[0] > '2') return std::nullopt;
    return t[0] - '0';
}

ScoreResult score_candidates(const std::vector<Candidate>& cands, const corpus::DocumentIndex& docs,
                             backends::ChatClient& evaluator, int k, std::size_t workers) {
    std::vector<const corpus::Document*> resolved(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
        resolved[i] = docs.find(cands[i].doc_id);
        if (!resolved[i])
            throw std::invalid_argument("score_candidates: unknown doc_id " + cands[i].doc_id);
    }

    std::vector<std::optional<int>> ratings(cands.size());
    std::vector<char> skipped(cands.size(), 0);
    std::atomic<std::size_t> parse_failures{0};

    parallel_for(cands.size(), workers ? workers : evaluator.policy().max_in_flight, [&](std::size_t i) {
        std::string reply;
        try {
            reply = evaluator.complete(
                evaluator_request(resolved[i]->lang, cands[i].instruction_en, resolved[i]->text));
        } catch (const backends::BackendError& e) {
            log::warn("scoring: skipping candidate for " + cands[i].doc_id + ": " + e.what());
            skipped[i] = 1;
            return;
        }
        auto r = parse_rating(reply);
        if (!r) {
            ++parse_failures;
            r = 0;
        }
        ratings[i] = r;
    });

    ScoreResult result;
    result.parse_failures = parse_failures.load();
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (skipped[i]) {
            ++result.skipped;
            continue;
        }
        Candidate c = cands[i];
        c.rating_history[k] = *ratings[i];
        result.candidates.push_back(std::move(c));
    }
    return result;
}

namespace {

json counts_json(const std::map<int, std::size_t>& counts) {
    json j = json::object();
    for (const auto& [score, n] : counts) j[std::to_string(score)] = n;
    return j;
}

std::map<int, std::size_t> counts_from_json(const json& j) {
    std::map<int, std::size_t> out;
    for (const auto& [key, v] : j.items()) out[std::stoi(key)] = v.get<std::size_t>();
    return out;
}

}  // namespace

void to_json(json& j, const IterationState& s) {
    j = json{{"k", s.k},
             {"dx_size", s.dx.size()},
             {"mined", s.mined},
             {"selected_counts", counts_json(s.selected_counts)},
             {"config", s.config_snapshot}};
}

IterationState select_best(const std::vector<Candidate>& cands, const corpus::DocumentIndex& docs,
                           int k, std::size_t cap, const std::vector<XSample>& tuning_seed,
                           std::uint64_t rng_seed) {
    IterationState state;
    state.k = k + 1;
    state.selected_counts = {{0, 0}, {1, 0}, {2, 0}};

    std::vector<std::size_t> best;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto it = cands[i].rating_history.find(k);
        if (it == cands[i].rating_history.end())
            throw std::invalid_argument("select_best: candidate " + cands[i].doc_id +
                                        " has no rating for iteration " + std::to_string(k));
        ++state.selected_counts[it->second];
        if (it->second == 2) best.push_back(i);
    }
    if (best.size() > cap) {
        Rng rng(derive_seed(rng_seed, "select"));
        auto picks = rng.sample_indices(best.size(), cap);
        std::sort(picks.begin(), picks.end());
        std::vector<std::size_t> kept;
        kept.reserve(cap);
        for (auto p : picks) kept.push_back(best[p]);
        best = std::move(kept);
    }

    state.dx = tuning_seed;
    for (auto i : best) {
        const auto& c = cands[i];
        const auto* doc = docs.find(c.doc_id);
        if (!doc) throw std::invalid_argument("select_best: unknown doc_id " + c.doc_id);
        state.dx.push_back(make_mined_sample(c.lang.code() + "-mined-" + c.doc_id, c.instruction_en,
                                             doc->text, c.lang, 2, k));
    }
    state.mined = best.size();
    if (best.empty())
        log::warn("select_best: no candidate rated 2 at iteration " + std::to_string(k) +
                  "; keeping only the tuning seed");
    return state;
}

// ---------------------------------------------------------------------------
// Driver

void to_json(json& j, const RefinementConfig& c) {
    j = json{{"iterations", c.iterations},
             {"promotion_cap", c.promotion_cap},
             {"rng_seed", c.rng_seed}};
    if (c.synthesis.mixture)
        j["flaw_mixture"] = {{"deleted", c.synthesis.mixture->deleted},
                             {"duplicated", c.synthesis.mixture->duplicated},
                             {"model_output", c.synthesis.mixture->model_output}};
}

void to_json(json& j, const IterationSummary& s) {
    j = json{{"k", s.k},
             {"ratings", s.ratings},
             {"scored", s.scored},
             {"parse_failures", s.parse_failures},
             {"skipped", s.skipped},
             {"selected_counts", counts_json(s.selected_counts)},
             {"mined_doc_ids", s.mined_doc_ids}};
}

namespace {

IterationSummary summary_from_json(const json& j) {
    IterationSummary s;
    s.k = j.at("k").get<int>();
    s.ratings = j.at("ratings").get<std::size_t>();
    s.scored = j.at("scored").get<std::size_t>();
    s.parse_failures = j.at("parse_failures").get<std::size_t>();
    s.skipped = j.at("skipped").get<std::size_t>();
    s.selected_counts = counts_from_json(j.at("selected_counts"));
    s.mined_doc_ids = j.at("mined_doc_ids").get<std::vector<std::string>>();
    return s;
}

fs::path iteration_dir(const fs::path& run_dir, int k) { return run_dir / ("it" + std::to_string(k)); }

bool iteration_complete(const fs::path& dir) {
    const auto state = dir / "state.json";
    if (!fs::exists(state)) return false;
    return load_json(state).value("complete", false);
}

}  // namespace

std::vector<XSample> RefinementResult::promoted() const {
    std::vector<XSample> out;
    for (const auto& s : state.dx)
        if (s.origin == Origin::mined) out.push_back(s);
    return out;
}

RefinementResult run_refinement(const std::vector<corpus::Document>& docs,
                                const std::vector<Candidate>& cands,
                                const std::vector<XSample>& tuning_seed,
                                const std::vector<XSample>& rating_source,
                                const RefinementConfig& config, const IterationModels& models,
                                const std::optional<fs::path>& run_dir) {
    if (config.iterations < 1) throw std::invalid_argument("run_refinement: iterations must be >= 1");
    {
        std::unordered_set<std::string> tuning_ids;
        for (const auto& s : tuning_seed) tuning_ids.insert(s.id);
        for (const auto& s : rating_source)
            if (tuning_ids.count(s.id))
                throw std::invalid_argument("run_refinement: sample " + s.id +
                                            " is in both the tuning seed and the rating source");
    }

    const corpus::DocumentIndex index(docs);
    const json config_json = config;

    RefinementResult result;
    result.candidates = cands;
    result.state.k = 1;
    result.state.dx = tuning_seed;
    result.state.config_snapshot = config_json;

    for (int k = 1; k <= config.iterations; ++k) {
        const std::uint64_t seed_k = derive_seed(config.rng_seed, "iteration-" + std::to_string(k));
        std::optional<fs::path> dir;
        if (run_dir) dir = iteration_dir(*run_dir, k);

        if (dir && iteration_complete(*dir)) {
            const auto state_doc = load_json(*dir / "state.json");
            auto summary = summary_from_json(state_doc.at("summary"));
            summary.resumed = true;
            result.candidates = generation::load_candidates(*dir / "scored.jsonl");
            result.state.k = k + 1;
            result.state.dx = load_samples(*dir / "dx.jsonl");
            result.state.selected_counts = summary.selected_counts;
            result.state.mined = summary.mined_doc_ids.size();
            result.state.config_snapshot = config_json;
            result.iterations.push_back(std::move(summary));
            log::info("refinement: iteration " + std::to_string(k) + " loaded from " + dir->string());
            continue;
        }

        auto follower = models.follower ? models.follower(k) : nullptr;
        const auto ratings = synth_rating_set(rating_source, follower.get(), seed_k, config.synthesis);
        const auto evaluator_train = export_evaluator_train(ratings);
        if (dir) {
            fs::create_directories(*dir);
            write_jsonl(*dir / "ratings.jsonl", to_json_records(ratings));
            generation::write_records(*dir / "evaluator_train.jsonl", evaluator_train);
            generation::write_records(*dir / "follower_train.jsonl",
                                      export_follower_train(result.state.dx));
        }

        auto evaluator = models.evaluator ? models.evaluator(k) : nullptr;
        if (!evaluator) {
            if (dir)
                write_json(*dir / "checkpoint.json",
                           json{{"k", k},
                                {"awaiting", "evaluator"},
                                {"evaluator_train", (*dir / "evaluator_train.jsonl").string()},
                                {"complete", false}});
            log::warn("refinement: evaluator for iteration " + std::to_string(k) +
                      " is not available; pausing");
            result.status = RunStatus::paused;
            result.paused_at = k;
            return result;
        }

        auto scored = score_candidates(result.candidates, index, *evaluator, k, config.workers);
        auto next = select_best(scored.candidates, index, k, config.promotion_cap, tuning_seed, seed_k);
        next.config_snapshot = config_json;

        IterationSummary summary;
        summary.k = k;
        summary.ratings = ratings.size();
        summary.scored = scored.candidates.size();
        summary.parse_failures = scored.parse_failures;
        summary.skipped = scored.skipped;
        summary.selected_counts = next.selected_counts;
        for (const auto& s : next.dx)
            if (s.origin == Origin::mined) summary.mined_doc_ids.push_back(s.id.substr(s.lang.code().size() + 7));

        if (dir) {
            generation::write_candidates(*dir / "scored.jsonl", scored.candidates);
            write_samples(*dir / "dx.jsonl", next.dx);
            json state_doc = next;
            state_doc["summary"] = summary;
            state_doc["complete"] = true;
            write_json(*dir / "state.json", state_doc);
            fs::remove(*dir / "checkpoint.json");
        }

        result.candidates = std::move(scored.candidates);
        result.state = std::move(next);
        result.iterations.push_back(std::move(summary));
    }
    return result;
}

}  // namespace xforge::refinement
