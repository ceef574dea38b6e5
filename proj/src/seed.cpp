#include "xforge/seed.hpp"

#include <algorithm>
#include <stdexcept>

#include "xforge/random.hpp"
#include "xforge/text.hpp"

namespace xforge::seed {

void from_json(const json& j, NativeTurn& t) {
    t.instruction_en = j.at("instruction_en").get<std::string>();
    t.response = j.contains("response") && j["response"].is_string()
                     ? j["response"].get<std::string>()
                     : std::string{};
}

void from_json(const json& j, TranslatedPair& t) {
    t.instruction_en = j.at("instruction_en").get<std::string>();
    t.output = j.at("output").get<std::string>();
}

BuildResult build_seed(const std::vector<NativeTurn>& native,
                       const std::vector<TranslatedPair>& translated, const LanguageCode& lang) {
    if (native.empty() && translated.empty()) throw std::invalid_argument("build_seed: no input");
    BuildResult result;
    std::size_t n = 0;
    auto next_id = [&] { return lang.code() + "-seed-" + std::to_string(++n); };

    for (const auto& turn : native) {
        if (text::trim(turn.response).empty() || text::trim(turn.instruction_en).empty()) {
            ++result.skipped_native;
            continue;
        }
        result.samples.push_back(make_seed_sample(next_id(), turn.instruction_en, turn.response,
                                                  lang, Origin::seed_native));
    }
    for (const auto& pair : translated) {
        result.samples.push_back(make_seed_sample(next_id(), pair.instruction_en, pair.output, lang,
                                                  Origin::seed_translated));
    }
    if (result.samples.empty()) throw std::invalid_argument("build_seed: every input was skipped");
    return result;
}

SeedSplit split_seed(const std::vector<XSample>& seed, std::size_t tuning_size,
                     std::uint64_t rng_seed) {
    if (tuning_size >= seed.size())
        throw std::invalid_argument("split_seed: tuning_size " + std::to_string(tuning_size) +
                                    " leaves no rating source among " +
                                    std::to_string(seed.size()) + " samples");
    std::vector<std::size_t> order(seed.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(rng_seed, "seed-split"));
    rng.shuffle(order);

    std::vector<std::size_t> tuning(order.begin(), order.begin() + static_cast<long>(tuning_size));
    std::vector<std::size_t> rest(order.begin() + static_cast<long>(tuning_size), order.end());
    std::sort(tuning.begin(), tuning.end());
    std::sort(rest.begin(), rest.end());

    SeedSplit split;
    split.tuning.reserve(tuning.size());
    split.rating_source.reserve(rest.size());
    for (auto i : tuning) split.tuning.push_back(seed[i]);
    for (auto i : rest) split.rating_source.push_back(seed[i]);
    return split;
}

std::vector<NativeTurn> load_native(const std::filesystem::path& path) {
    return from_json_records<NativeTurn>(load_jsonl(path));
}

std::vector<TranslatedPair> load_translated(const std::filesystem::path& path) {
    return from_json_records<TranslatedPair>(load_jsonl(path));
}

}  // namespace xforge::seed
