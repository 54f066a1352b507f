#include "bmx/error.hpp"
#include "bmx/text_pipeline.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace bmx;

namespace {

PipelineConfig no_stem() {
    PipelineConfig c;
    c.stemmer = Stemmer::none;
    return c;
}

std::vector<std::string> toks(std::string_view text, const PipelineConfig& c = {}) { return tokenize(text, c).tokens; }

} // namespace

TEST(Tokenize, StopwordRemovalWithoutStemming) {
    EXPECT_EQ(toks("The Premier League", no_stem()), (std::vector<std::string>{"premier", "league"}));
}

TEST(Tokenize, EmptyInput) {
    EXPECT_TRUE(tokenize("", PipelineConfig{}).empty());
    EXPECT_EQ(tokenize("", PipelineConfig{}).length(), 0u);
    EXPECT_TRUE(tokenize("   \t\n", PipelineConfig{}).empty());
}

TEST(Tokenize, PorterStemming) {
    EXPECT_EQ(toks("running runs"), (std::vector<std::string>{"run", "run"}));
}

TEST(Tokenize, KeepsNumbersAndAlphanumerics) {
    EXPECT_EQ(toks("COVID19 in 2020, covid-19", no_stem()),
              (std::vector<std::string>{"covid19", "2020", "covid", "19"}));
}

TEST(Tokenize, PreservesSurfaceOrder) {
    EXPECT_EQ(toks("zebra apple mango", no_stem()), (std::vector<std::string>{"zebra", "apple", "mango"}));
}

TEST(Tokenize, TogglesAreIndependent) {
    PipelineConfig c = no_stem();
    c.lowercase = false;
    c.stopwords.clear();
    EXPECT_EQ(toks("The Cat", c), (std::vector<std::string>{"The", "Cat"}));

    PipelineConfig keep = no_stem();
    keep.strip_punctuation = false;
    keep.stopwords.clear();
    EXPECT_EQ(toks("a, b!", keep), (std::vector<std::string>{"a", ",", "b", "!"}));
}

TEST(Tokenize, WhitespaceSplitter) {
    PipelineConfig c = no_stem();
    c.token_splitter = TokenSplitter::whitespace;
    c.stopwords.clear();
    EXPECT_EQ(toks("東京 タワー  x-y", c), (std::vector<std::string>{"東京", "タワー", "x", "y"}));
    c.strip_punctuation = false;
    EXPECT_EQ(toks("x-y z.", c), (std::vector<std::string>{"x-y", "z."}));
}

TEST(Tokenize, UnicodeLowercaseAndInvalidUtf8) {
    PipelineConfig c = no_stem();
    c.stopwords.clear();
    EXPECT_EQ(toks("Ärger ΣΟΦΙΑ Москва", c), (std::vector<std::string>{"ärger", "σοφια", "москва"}));
    // Invalid bytes never crash and never produce empty tokens.
    const std::string bad = "ab\xff\xfe" "cd \xc3";
    for (const auto& t : toks(bad, c)) {
        EXPECT_FALSE(t.empty());
    }
}

TEST(Tokenize, IdempotentOnOwnOutput) {
    std::mt19937 rng(7);
    const std::vector<std::string> words = {"running", "The", "generalizations", "caresses", "ponies", "relational",
                                            "1990s", "Hope's", "agreed", "sky", "is", "feed", "happy", "ones",
                                            "conditional", "electricity", "hopping", "COVID-19", "yyyy", "s"};
    for (int trial = 0; trial < 300; ++trial) {
        std::string text;
        const int len = std::uniform_int_distribution<int>(0, 12)(rng);
        for (int i = 0; i < len; ++i) {
            text += words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
            text += ' ';
        }
        for (const auto& config : {PipelineConfig{}, no_stem()}) {
            const auto once = tokenize(text, config);
            std::string joined;
            for (const auto& t : once.tokens) {
                joined += t + " ";
            }
            EXPECT_EQ(tokenize(joined, config), once) << text;
            EXPECT_EQ(tokenize(text, config), once) << "non-deterministic on: " << text;
        }
    }
}

TEST(Porter, ReferenceVectors) {
    std::ifstream in(std::string(BMX_TEST_DATA) + "/porter_vectors.tsv");
    ASSERT_TRUE(in.good());
    std::string line;
    std::size_t checked = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto tab = line.find('\t');
        ASSERT_NE(tab, std::string::npos) << line;
        const auto word = line.substr(0, tab);
        const auto stem = line.substr(tab + 1);
        EXPECT_EQ(porter_stem(word), stem) << "word: " << word;
        ++checked;
    }
    EXPECT_GT(checked, 2500u);
}

TEST(Config, ParseEnums) {
    EXPECT_EQ(parse_stemmer("none"), Stemmer::none);
    EXPECT_EQ(parse_stemmer("porter-english"), Stemmer::porter_english);
    EXPECT_EQ(parse_token_splitter("whitespace"), TokenSplitter::whitespace);
    EXPECT_THROW((void)parse_stemmer("snowball"), ConfigError);
    EXPECT_THROW((void)parse_token_splitter("bpe"), ConfigError);
}

TEST(Config, FingerprintTracksEveryField) {
    const PipelineConfig base;
    EXPECT_EQ(fingerprint(base), fingerprint(PipelineConfig{}));
    auto a = base;
    a.lowercase = false;
    auto b = base;
    b.strip_punctuation = false;
    auto c = base;
    c.stemmer = Stemmer::none;
    auto d = base;
    d.token_splitter = TokenSplitter::whitespace;
    auto e = base;
    e.stopwords.erase("the");
    for (const auto& other : {a, b, c, d, e}) {
        EXPECT_NE(fingerprint(other), fingerprint(base));
    }
}

TEST(Config, StopwordFile) {
    const auto path = std::filesystem::temp_directory_path() / "bmx_test_stopwords.txt";
    {
        std::ofstream out(path);
        out << "# comment\nfoo\n  bar  \n\nBaz\n";
    }
    const auto words = load_stopword_file(path.string());
    EXPECT_EQ(words, (StopwordSet{"foo", "bar", "Baz"}));
    std::filesystem::remove(path);
    EXPECT_THROW((void)load_stopword_file("/nonexistent/stopwords.txt"), ConfigError);
}

TEST(Config, ShippedStopwordListMatchesBuiltin) {
    const auto shipped = load_stopword_file(std::string(BMX_TEST_DATA) + "/../../data/english_stopwords.txt");
    EXPECT_EQ(shipped, english_stopwords());
    EXPECT_EQ(english_stopwords().size(), 179u);
}
