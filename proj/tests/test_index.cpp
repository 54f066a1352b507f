#include "bmx/error.hpp"
#include "bmx/index.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

using namespace bmx;
namespace fs = std::filesystem;

namespace {

PipelineConfig plain() {
    PipelineConfig c;
    c.stemmer = Stemmer::none;
    c.stopwords.clear();
    return c;
}

std::vector<Posting> list(const InvertedIndex& index, std::string_view term) {
    const auto s = index.postings(term);
    return {s.begin(), s.end()};
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() / ("bmx_index_test_" + std::to_string(::getpid()) + "_" +
                                             std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<Document> random_docs(std::mt19937& rng, std::size_t n) {
    std::vector<Document> docs;
    for (std::size_t d = 0; d < n; ++d) {
        std::string text;
        const int len = std::uniform_int_distribution<int>(0, 40)(rng);
        for (int i = 0; i < len; ++i) {
            text += "w" + std::to_string(std::uniform_int_distribution<int>(0, 30)(rng)) + " ";
        }
        docs.push_back({"d" + std::to_string(d), text});
    }
    return docs;
}

} // namespace

TEST(BuildIndex, TwoDocs) {
    const std::vector<Document> docs = {{"a", "x y"}, {"b", "y"}};
    const auto index = build_index(docs, plain());
    EXPECT_EQ(index.doc_count(), 2u);
    EXPECT_DOUBLE_EQ(index.avg_doc_length(), 1.5);
    EXPECT_EQ(list(index, "y"), (std::vector<Posting>{{0, 1}, {1, 1}}));
    EXPECT_EQ(list(index, "x"), (std::vector<Posting>{{0, 1}}));
    EXPECT_EQ(index.doc_frequency("y"), 2u);
    EXPECT_EQ(index.term_frequency("x", 1), 0u);
    EXPECT_EQ(index.external_id(1), "b");
    EXPECT_EQ(index.internal_id("a"), DocId{0});
    EXPECT_FALSE(index.internal_id("zz"));
    EXPECT_NO_THROW(index.check_invariants());
}

TEST(BuildIndex, EmptyStream) {
    const auto index = build_index({}, plain());
    EXPECT_EQ(index.doc_count(), 0u);
    EXPECT_EQ(index.avg_doc_length(), 0.0);
    EXPECT_EQ(index.vocabulary_size(), 0u);
    EXPECT_NO_THROW(index.check_invariants());
}

TEST(BuildIndex, RepeatedToken) {
    const std::vector<Document> docs = {{"a", "y y y"}};
    const auto index = build_index(docs, plain());
    EXPECT_EQ(list(index, "y"), (std::vector<Posting>{{0, 3}}));
    EXPECT_EQ(std::vector<std::uint32_t>(index.doc_lengths().begin(), index.doc_lengths().end()),
              std::vector<std::uint32_t>{3});
}

TEST(BuildIndex, EmptyDocumentsKeepTheirIds) {
    const std::vector<Document> docs = {{"a", ""}, {"b", "the"}, {"c", "x"}};
    const auto index = build_index(docs, PipelineConfig{});
    EXPECT_EQ(index.doc_count(), 3u);
    EXPECT_EQ(index.doc_length(0), 0u);
    EXPECT_EQ(index.doc_length(1), 0u);
    EXPECT_DOUBLE_EQ(index.avg_doc_length(), 1.0 / 3.0);
    EXPECT_EQ(list(index, "x"), (std::vector<Posting>{{2, 1}}));
}

TEST(BuildIndex, DuplicateIdNamesTheId) {
    const std::vector<Document> docs = {{"a", "x"}, {"dup", "y"}, {"dup", "z"}};
    try {
        (void)build_index(docs, plain());
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("'dup'"), std::string::npos);
    }
}

TEST(BuildIndex, IndependentOfThreadCount) {
    std::mt19937 rng(11);
    const auto docs = random_docs(rng, 97);
    const auto single = build_index(docs, PipelineConfig{}, {1});
    for (unsigned threads : {2u, 3u, 8u}) {
        EXPECT_TRUE(build_index(docs, PipelineConfig{}, {threads}) == single);
    }
}

TEST(BuildIndex, InvariantsOnRandomCorpora) {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const auto docs = random_docs(rng, std::uniform_int_distribution<std::size_t>(0, 40)(rng));
        const auto index = build_index(docs, plain());
        EXPECT_NO_THROW(index.check_invariants());
        for (const auto& term : index.terms()) {
            std::size_t l = 0;
            for (DocId d = 0; d < index.doc_count(); ++d) {
                l += index.term_frequency(term, d) > 0 ? 1 : 0;
            }
            EXPECT_EQ(index.doc_frequency(term), l);
        }
    }
}

TEST(Persistence, RoundTrip) {
    TempDir dir;
    const std::vector<Document> docs = {{"a", "x y"}, {"b", "y"}};
    const auto index = build_index(docs, plain());
    save_index(index, dir.path() / "i.bmx");
    const auto loaded = load_index(dir.path() / "i.bmx");
    EXPECT_TRUE(loaded == index);
    EXPECT_EQ(loaded.pipeline_fingerprint(), fingerprint(plain()));
    EXPECT_EQ(list(loaded, "y"), (std::vector<Posting>{{0, 1}, {1, 1}}));
    EXPECT_EQ(loaded.internal_id("b"), DocId{1});
}

TEST(Persistence, RoundTripRandomAndEmpty) {
    TempDir dir;
    std::mt19937 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto docs = random_docs(rng, std::uniform_int_distribution<std::size_t>(0, 30)(rng));
        const auto index = build_index(docs, PipelineConfig{});
        const auto path = dir.path() / ("r" + std::to_string(trial) + ".bmx");
        save_index(index, path);
        EXPECT_TRUE(load_index(path) == index);
    }
}

TEST(Persistence, ByteIdenticalRebuild) {
    TempDir dir;
    std::mt19937 rng(9);
    const auto docs = random_docs(rng, 60);
    save_index(build_index(docs, PipelineConfig{}, {1}), dir.path() / "a.bmx");
    save_index(build_index(docs, PipelineConfig{}, {4}), dir.path() / "b.bmx");
    EXPECT_EQ(slurp(dir.path() / "a.bmx"), slurp(dir.path() / "b.bmx"));
}

TEST(Persistence, RefusesOverwriteWithoutFlag) {
    TempDir dir;
    const auto index = build_index({}, plain());
    save_index(index, dir.path() / "i.bmx");
    EXPECT_THROW(save_index(index, dir.path() / "i.bmx"), ConfigError);
    EXPECT_NO_THROW(save_index(index, dir.path() / "i.bmx", true));
}

TEST(Persistence, UnwritableLocation) {
    const auto index = build_index({}, plain());
    try {
        save_index(index, "/nonexistent-dir/sub/i.bmx");
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/sub/i.bmx"), std::string::npos);
    }
}

TEST(Persistence, BadMagic) {
    TempDir dir;
    {
        std::ofstream out(dir.path() / "bad.bmx", std::ios::binary);
        out << "NOTANINDEX and some more bytes";
    }
    EXPECT_THROW((void)load_index(dir.path() / "bad.bmx"), FormatError);
    EXPECT_THROW((void)load_index(dir.path() / "missing.bmx"), DataError);
}

TEST(Persistence, UnsupportedVersion) {
    TempDir dir;
    save_index(build_index(std::vector<Document>{{"a", "x"}}, plain()), dir.path() / "i.bmx");
    auto bytes = slurp(dir.path() / "i.bmx");
    bytes[8] = 2; // version field follows the 8 magic bytes
    {
        std::ofstream out(dir.path() / "v2.bmx", std::ios::binary);
        out << bytes;
    }
    try {
        (void)load_index(dir.path() / "v2.bmx");
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("unsupported version 2"), std::string::npos);
    }
}

TEST(Persistence, TruncatedAndCorruptFilesAreFormatErrors) {
    TempDir dir;
    std::mt19937 rng(1);
    save_index(build_index(random_docs(rng, 10), plain()), dir.path() / "i.bmx");
    const auto bytes = slurp(dir.path() / "i.bmx");
    for (std::size_t cut : {std::size_t{9}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
        std::ofstream(dir.path() / "t.bmx", std::ios::binary) << bytes.substr(0, cut);
        EXPECT_THROW((void)load_index(dir.path() / "t.bmx"), FormatError) << "cut at " << cut;
    }
    // Flip bytes inside the payload: either still a valid index or a FormatError, never a crash.
    for (std::size_t pos = 16; pos < bytes.size(); pos += 7) {
        auto broken = bytes;
        broken[pos] = static_cast<char>(broken[pos] ^ 0x5a);
        std::ofstream(dir.path() / "c.bmx", std::ios::binary) << broken;
        try {
            (void)load_index(dir.path() / "c.bmx");
        } catch (const FormatError&) {
        }
    }
}

TEST(CorpusJsonl, TitleAndTextJoined) {
    TempDir dir;
    {
        std::ofstream out(dir.path() / "c.jsonl");
        out << R"({"_id": "1", "title": "Hello", "text": "world"})" << "\n\n"
            << R"({"_id": 2, "title": "", "text": "only text"})" << "\n"
            << R"({"_id": "3", "title": null, "text": "null title"})" << "\n";
    }
    const auto docs = read_corpus_jsonl(dir.path() / "c.jsonl");
    ASSERT_EQ(docs.size(), 3u);
    EXPECT_EQ(docs[0].external_id, "1");
    EXPECT_EQ(docs[0].text, "Hello world");
    EXPECT_EQ(docs[1].external_id, "2");
    EXPECT_EQ(docs[1].text, "only text");
    EXPECT_EQ(docs[2].text, "null title");
}

TEST(CorpusJsonl, MalformedLineHasLineNumber) {
    TempDir dir;
    {
        std::ofstream out(dir.path() / "c.jsonl");
        out << R"({"_id": "1", "text": "ok"})" << "\n" << "{broken\n";
    }
    try {
        (void)read_corpus_jsonl(dir.path() / "c.jsonl");
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
    }
    EXPECT_THROW((void)read_corpus_jsonl(dir.path() / "none.jsonl"), DataError);
}
