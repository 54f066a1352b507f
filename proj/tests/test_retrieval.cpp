#include "oracle_check.hpp"

#include "bmx/error.hpp"
#include "bmx/retrieval.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <random>

using namespace bmx;

namespace {

InvertedIndex toy_index() {
    const std::vector<Document> docs = {{"a", "x y"}, {"b", "y"}};
    return build_index(docs, oracle::raw_pipeline());
}

std::vector<ScorerConfig> all_scorers() {
    std::vector<ScorerConfig> out;
    for (bool normalize : {false, true}) {
        ScorerConfig bmx_default;
        bmx_default.normalize = normalize;
        out.push_back(bmx_default);
        ScorerConfig bmx_explicit = bmx_default;
        bmx_explicit.alpha = 0.7;
        bmx_explicit.beta = 0.4;
        out.push_back(bmx_explicit);
        for (auto kernel : {Bm25Kernel::robertson, Bm25Kernel::atire, Bm25Kernel::bm25plus, Bm25Kernel::bm25l,
                            Bm25Kernel::lucene}) {
            ScorerConfig s;
            s.algo = Algorithm::bm25;
            s.bm25.kernel = kernel;
            s.normalize = normalize;
            out.push_back(s);
        }
    }
    return out;
}

bool bitwise_equal(const std::vector<ScoredHit>& a, const std::vector<ScoredHit>& b) {
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].internal_id != b[i].internal_id || std::memcmp(&a[i].score, &b[i].score, sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST(Search, SingleMatchingDocument) {
    const auto index = toy_index();
    for (const auto& s : all_scorers()) {
        const auto hits = search_topk("x", 10, index, oracle::raw_pipeline(), s);
        ASSERT_EQ(hits.size(), 1u);
        EXPECT_EQ(hits[0].external_id, "a");
    }
}

TEST(Search, NoIndexedTokenOrEmptyQuery) {
    const auto index = toy_index();
    EXPECT_TRUE(search_topk("zzz", 10, index, oracle::raw_pipeline(), {}).empty());
    EXPECT_TRUE(search_topk("", 10, index, oracle::raw_pipeline(), {}).empty());
}

TEST(Search, EmptyIndexReturnsNothing) {
    const auto index = build_index({}, oracle::raw_pipeline());
    EXPECT_TRUE(search_topk("x", 10, index, oracle::raw_pipeline(), {}).empty());
}

TEST(Search, ContractAndConfigErrors) {
    const auto index = toy_index();
    EXPECT_THROW((void)search_topk("x", 0, index, oracle::raw_pipeline(), {}), ContractViolation);
    EXPECT_THROW((void)search_topk("x", 1, index, PipelineConfig{}, {}), ConfigError);
    ScorerConfig bad;
    bad.alpha = -1.0;
    EXPECT_THROW((void)search_topk("x", 1, index, oracle::raw_pipeline(), bad), ConfigError);
}

TEST(Search, TiesBrokenByInternalId) {
    const std::vector<Document> docs = {{"z", "q"}, {"y", "q"}, {"x", "q"}, {"w", "r"}};
    const auto index = build_index(docs, oracle::raw_pipeline());
    const auto hits = search_topk("q", 10, index, oracle::raw_pipeline(), {});
    ASSERT_EQ(hits.size(), 3u);
    EXPECT_EQ(hits[0].internal_id, 0u);
    EXPECT_EQ(hits[1].internal_id, 1u);
    EXPECT_EQ(hits[2].internal_id, 2u);
}

TEST(Search, TopKIsPrefixOfLargerK) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto c = oracle::random_case(rng, 40, 80);
        const auto index = build_index(c.docs, oracle::raw_pipeline());
        const auto q = oracle::join(oracle::random_query(rng));
        for (const auto& s : all_scorers()) {
            const Searcher searcher(index, oracle::raw_pipeline(), s);
            const auto all = searcher.search(q, index.doc_count() + 1);
            for (std::size_t k = 1; k <= all.size(); ++k) {
                const auto top = searcher.search(q, k);
                ASSERT_EQ(top.size(), k);
                EXPECT_TRUE(std::equal(top.begin(), top.end(), all.begin()));
            }
        }
    }
}

TEST(Search, MatchesOracleOnRandomCorpora) {
    std::mt19937_64 rng(77);
    oracle::CheckStats stats;
    for (int trial = 0; trial < 30; ++trial) {
        const auto c = oracle::random_case(rng);
        const auto index = build_index(c.docs, oracle::raw_pipeline());
        const oracle::Corpus<double> corpus(c.tokens);
        for (int which = 0; which < 6; ++which) {
            oracle::check_query(index, corpus, oracle::random_query(rng), oracle::random_scorer(rng, which), stats);
        }
    }
    for (const auto& f : stats.failures) {
        ADD_FAILURE() << f;
    }
}

TEST(Wqa, ZeroWeightsAndEmptyAugmentationReproduceBaseSearch) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        const auto c = oracle::random_case(rng, 40, 80);
        const auto index = build_index(c.docs, oracle::raw_pipeline());
        const auto q = oracle::join(oracle::random_query(rng));
        for (const auto& s : all_scorers()) {
            const Searcher searcher(index, oracle::raw_pipeline(), s);
            const auto base = searcher.search(q, 100);
            EXPECT_TRUE(bitwise_equal(searcher.search_wqa({q, {}}, 100), base));
            AugmentedQuerySet zero{q, {}};
            for (int i = 0; i < 3; ++i) {
                zero.augmented.push_back({oracle::join(oracle::random_query(rng)), 0.0});
            }
            EXPECT_TRUE(bitwise_equal(searcher.search_wqa(zero, 100), base));
        }
    }
}

TEST(Wqa, DuplicateOfOriginalWithUnitWeightDoublesScores) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 40; ++trial) {
        const auto c = oracle::random_case(rng, 40, 80);
        const auto index = build_index(c.docs, oracle::raw_pipeline());
        const auto q = oracle::join(oracle::random_query(rng));
        for (const auto& s : all_scorers()) {
            const Searcher searcher(index, oracle::raw_pipeline(), s);
            const auto base = searcher.search(q, 100);
            const auto doubled = searcher.search_wqa({q, {{q, 1.0}}}, 100);
            ASSERT_EQ(doubled.size(), base.size());
            for (std::size_t i = 0; i < base.size(); ++i) {
                EXPECT_EQ(doubled[i].internal_id, base[i].internal_id);
                EXPECT_EQ(doubled[i].score, 2.0 * base[i].score);
            }
        }
    }
}

TEST(Wqa, CombinesOverUnionOfCandidates) {
    const std::vector<Document> docs = {{"a", "x"}, {"b", "y"}, {"c", "z"}};
    const auto index = build_index(docs, oracle::raw_pipeline());
    ScorerConfig s;
    s.algo = Algorithm::bm25;
    const Searcher searcher(index, oracle::raw_pipeline(), s);
    const auto hits = searcher.search_wqa({"x", {{"y", 0.5}, {"nothing", 0.9}}}, 10);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].external_id, "a");
    EXPECT_EQ(hits[1].external_id, "b");
    const auto y = searcher.search("y", 1);
    EXPECT_EQ(hits[1].score, 0.5 * y[0].score);
}

TEST(Wqa, MatchesOracleCombination) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 40; ++trial) {
        const auto c = oracle::random_case(rng, 30, 60);
        const auto index = build_index(c.docs, oracle::raw_pipeline());
        const oracle::Corpus<double> corpus(c.tokens);
        const auto q = oracle::random_query(rng);
        std::vector<std::vector<std::string>> aug;
        AugmentedQuerySet set{oracle::join(q), {}};
        std::vector<double> w;
        for (int i = 0; i < 3; ++i) {
            aug.push_back(oracle::random_query(rng));
            w.push_back(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
            set.augmented.push_back({oracle::join(aug.back()), w.back()});
        }
        for (int which = 0; which < 6; ++which) {
            const auto s = oracle::random_scorer(rng, which);
            std::vector<std::vector<std::string>> all = aug;
            all.push_back(q);
            std::vector<std::pair<std::size_t, double>> expected;
            for (auto d : corpus.candidates(all)) {
                double total = q.empty() ? 0.0 : oracle::oracle_score(corpus, q, d, s);
                for (std::size_t i = 0; i < aug.size(); ++i) {
                    if (!aug[i].empty()) {
                        total += w[i] * oracle::oracle_score(corpus, aug[i], d, s);
                    }
                }
                expected.emplace_back(d, total);
            }
            expected = oracle::full_sort(std::move(expected));
            const auto hits = Searcher(index, oracle::raw_pipeline(), s).search_wqa(set, 100);
            ASSERT_EQ(hits.size(), expected.size());
            for (std::size_t i = 0; i < hits.size(); ++i) {
                EXPECT_NEAR(hits[i].score, expected[i].second, 1e-9);
            }
        }
    }
}

TEST(Wqa, RejectsWeightsOutsideUnitInterval) {
    const auto index = toy_index();
    const Searcher searcher(index, oracle::raw_pipeline(), {});
    EXPECT_THROW((void)searcher.search_wqa({"x", {{"y", 1.5}}}, 5), ConfigError);
    EXPECT_THROW((void)searcher.search_wqa({"x", {{"y", -0.1}}}, 5), ConfigError);
}
