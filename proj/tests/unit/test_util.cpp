#include <doctest.h>

#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "test_support.hpp"
#include "xforge/hash.hpp"
#include "xforge/jsonl.hpp"
#include "xforge/language.hpp"
#include "xforge/numeric.hpp"
#include "xforge/parallel.hpp"
#include "xforge/random.hpp"
#include "xforge/text.hpp"

using namespace xforge;

TEST_CASE("scalar_count counts code points, not bytes") {
    CHECK(text::scalar_count("") == 0);
    CHECK(text::scalar_count("abc") == 3);
    CHECK(text::scalar_count("নমস্কার") == 7);
    CHECK(text::scalar_count("สวัสดี") == 6);
    CHECK(text::scalar_count("日本") == 2);
    CHECK(text::scalar_count("😀") == 1);
    CHECK(text::scalar_count("\xff\xfe") == 2);
}

TEST_CASE("utf8 round trip") {
    const std::string s = "Kiswahili – اردو – हिन्दी 😀";
    CHECK(text::encode_utf8(text::decode_utf8(s)) == s);
    const auto bad = text::decode_utf8("a\xc3");
    REQUIRE(bad.size() == 2);
    CHECK(bad[1] == U'�');
}

TEST_CASE("whitespace helpers") {
    CHECK(text::normalize_whitespace("  a \t b\n\nc  ") == "a b c");
    CHECK(text::trim("\n x y \t") == "x y");
    CHECK(text::split_words(" one  two\tthree ") == std::vector<std::string>{"one", "two", "three"});
    CHECK(text::starts_with_ci("Please write", "please"));
    CHECK_FALSE(text::starts_with_ci("Pl", "please"));
}

TEST_CASE("render fills known placeholders only") {
    CHECK(text::render("{a} and {b} but not {c}", {{"a", "1"}, {"b", "{a}"}}) == "1 and {a} but not {c}");
    CHECK(text::render("{unterminated", {{"unterminated", "x"}}) == "{unterminated");
}

TEST_CASE("sha256 matches the published test vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    Sha256 h;
    h.update("a");
    h.update("bc");
    CHECK(h.hex_digest() == sha256_hex("abc"));
}

TEST_CASE("hash64 is the big-endian prefix of sha256") {
    const auto hex = sha256_hex("xforge");
    CHECK(hash64("xforge") == std::stoull(hex.substr(0, 16), nullptr, 16));
}

TEST_CASE("sha256_file") {
    testing::TempDir dir;
    std::ofstream(dir / "f") << "abc";
    CHECK(sha256_file(dir / "f") == sha256_hex("abc"));
    CHECK_THROWS(sha256_file(dir / "missing"));
}

TEST_CASE("Rng engine matches the standard's reference value") {
    // The 10000th output of a default-seeded mt19937_64 is fixed by the standard.
    Rng rng(5489u);
    std::uint64_t v = 0;
    for (int i = 0; i < 10000; ++i) v = rng.next();
    CHECK(v == 9981545732273789042ull);
}

TEST_CASE("Rng draws are deterministic and in range") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.index(7);
        CHECK(x == b.index(7));
        CHECK(x < 7);
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK_THROWS_AS(a.index(0), std::invalid_argument);
}

TEST_CASE("Rng index is roughly uniform") {
    Rng rng(1);
    std::map<std::size_t, int> counts;
    for (int i = 0; i < 60000; ++i) ++counts[rng.index(6)];
    for (const auto& [v, c] : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("sample_indices gives k distinct indices") {
    Rng rng(3);
    const auto s = rng.sample_indices(100, 40);
    CHECK(s.size() == 40);
    CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 40);
    for (auto i : s) CHECK(i < 100);
    CHECK(rng.sample_indices(5, 5).size() == 5);
    CHECK_THROWS(rng.sample_indices(3, 4));
}

TEST_CASE("shuffle is a permutation") {
    Rng rng(9);
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    rng.shuffle(v);
    std::sort(v.begin(), v.end());
    CHECK(v == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}

TEST_CASE("derive_seed separates tags and parents") {
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
    CHECK(derive_seed(7, 3) == derive_seed(7, "3"));
}

TEST_CASE("parallel_for places results by index and rethrows") {
    std::vector<int> out(500, -1);
    parallel_for(out.size(), 8, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));

    CHECK_THROWS_WITH(parallel_for(100, 4,
                                   [](std::size_t i) {
                                       if (i == 17) throw std::runtime_error("boom");
                                   }),
                      "boom");
    int calls = 0;
    parallel_for(0, 4, [&](std::size_t) { ++calls; });
    CHECK(calls == 0);
}

TEST_CASE("percent_1dp rounds half up on exact integers") {
    CHECK(percent_1dp(49, 80) == doctest::Approx(61.3));
    CHECK(percent_1dp(1, 8) == doctest::Approx(12.5));
    CHECK(percent_1dp(1, 3) == doctest::Approx(33.3));
    CHECK(percent_1dp(2, 3) == doctest::Approx(66.7));
    CHECK(percent_1dp(1, 16) == doctest::Approx(6.3));  // 6.25 rounds up
    CHECK(percent_1dp(0, 5) == 0.0);
    CHECK(percent_1dp(5, 5) == 100.0);
    CHECK(round_1dp(8.25) == doctest::Approx(8.3));
    CHECK(round_1dp(7.04) == doctest::Approx(7.0));
}

TEST_CASE("percent_1dp agrees with a rational oracle") {
    // Oracle: exact rational 1000*c/t compared against the half-way point.
    for (std::size_t t = 1; t <= 120; ++t)
        for (std::size_t c = 0; c <= t; ++c) {
            const std::size_t tenths = (1000 * c) / t;
            const std::size_t rem = (1000 * c) % t;
            const std::size_t expect = tenths + (2 * rem >= t ? 1 : 0);
            CHECK(percent_1dp(c, t) == doctest::Approx(static_cast<double>(expect) / 10.0));
        }
}

TEST_CASE("language codes") {
    CHECK(kSupportedLanguages.size() == 11);
    for (auto code : kSupportedLanguages) CHECK(LanguageCode::parse(code).has_value());
    CHECK_THROWS(LanguageCode("xx"));
    CHECK_FALSE(LanguageCode::parse("SW").has_value());
    CHECK(LanguageCode("ur").right_to_left());
    CHECK_FALSE(LanguageCode("hi").right_to_left());
    CHECK(english_name(LanguageCode("sw")) == "Swahili");
    CHECK(to_string(LanguageCode("sw").tier()) == "low");
    CHECK(to_string(LanguageCode("en").tier()) == "high");

    json j = LanguageCode("th");
    CHECK(j == "th");
    CHECK(j.get<LanguageCode>() == LanguageCode("th"));
    CHECK_THROWS(json("zz").get<LanguageCode>());
}

TEST_CASE("jsonl reader counts malformed lines and keeps going") {
    std::istringstream in("{\"a\":1}\nnot json\n\n{\"a\":2}\n");
    std::vector<int> seen;
    const auto st = read_jsonl(in, [&](const json& j) {
        seen.push_back(j["a"].get<int>());
        return true;
    });
    CHECK(seen == std::vector<int>{1, 2});
    CHECK(st.records == 3);
    CHECK(st.malformed == 1);
}

TEST_CASE("load_jsonl refuses a file with malformed lines") {
    testing::TempDir dir;
    std::ofstream(dir / "bad.jsonl") << "{}\n{oops\n";
    CHECK_THROWS_AS(load_jsonl(dir / "bad.jsonl"), InputError);
}

TEST_CASE("jsonl write and load round trip") {
    testing::TempDir dir;
    write_jsonl(dir / "x.jsonl", {json{{"k", "v"}}, json{{"k", "ü"}}});
    const auto back = load_jsonl(dir / "x.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[1]["k"] == "ü");
    write_json(dir / "d.json", json{{"n", 3}});
    CHECK(load_json(dir / "d.json")["n"] == 3);
    CHECK_THROWS(load_json(dir / "nope.json"));
}
