#include "bmx/error.hpp"
#include "bmx/index.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace bmx {

namespace {

constexpr std::array<char, 8> kMagic = {'B', 'M', 'X', 'I', 'N', 'D', 'E', 'X'};

enum class Section : std::uint32_t {
    stats = 0x54415453,    // "STAT"
    docs = 0x53434F44,     // "DOCS"
    terms = 0x4D524554,    // "TERM"
    postings = 0x54534F50, // "POST"
};

/// Little-endian byte sink.
class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    void raw(std::string_view s) { buf_.append(s); }
    [[nodiscard]] const std::string& bytes() const noexcept { return buf_; }
    [[nodiscard]] std::string take() { return std::move(buf_); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) {
            buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        }
    }
    std::string buf_;
};

class Reader {
public:
    Reader(std::string_view data, std::string context) : data_(data), context_(std::move(context)) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view bytes(std::size_t n) {
        need(n);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::string str() { return std::string(bytes(u32())); }
    [[nodiscard]] bool at_end() const noexcept { return pos_ == data_.size(); }
    [[nodiscard]] std::size_t remaining() const noexcept { return data_.size() - pos_; }

    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) {
            throw FormatError(context_ + ": truncated data");
        }
    }

private:
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += n;
        return v;
    }

    std::string_view data_;
    std::string context_;
    std::size_t pos_ = 0;
};

void write_section(Writer& out, Section tag, const std::string& payload) {
    out.u32(static_cast<std::uint32_t>(tag));
    out.u64(payload.size());
    out.raw(payload);
}

std::string_view read_section(Reader& in, Section expected, const std::string& context) {
    const auto tag = in.u32();
    if (tag != static_cast<std::uint32_t>(expected)) {
        std::ostringstream msg;
        msg << context << ": unexpected section tag 0x" << std::hex << tag;
        throw FormatError(msg.str());
    }
    const auto size = in.u64();
    if (size > in.remaining()) {
        throw FormatError(context + ": section length exceeds file size");
    }
    return in.bytes(static_cast<std::size_t>(size));
}

} // namespace

void save_index(const InvertedIndex& index, const std::filesystem::path& path, bool overwrite) {
    std::error_code ec;
    if (!overwrite && std::filesystem::exists(path, ec)) {
        throw ConfigError("refusing to overwrite existing index " + path.string() + " (use --force)");
    }

    Writer stats;
    stats.u64(index.doc_count());
    stats.u64(index.total_length());
    stats.f64(index.avg_doc_length());
    stats.u64(index.pipeline_fingerprint());
    stats.u64(index.vocabulary_size());
    stats.u64(index.posting_count());

    Writer docs;
    for (DocId d = 0; d < index.doc_count(); ++d) {
        docs.u32(index.doc_length(d));
        docs.str(index.external_id(d));
    }

    Writer terms;
    Writer postings;
    for (std::uint32_t t = 0; t < index.vocabulary_size(); ++t) {
        const auto list = index.postings_by_id(t);
        terms.str(index.terms()[t]);
        terms.u32(static_cast<std::uint32_t>(list.size()));
        for (const auto& p : list) {
            postings.u32(p.doc_id);
            postings.u32(p.tf);
        }
    }

    Writer file;
    file.raw(std::string_view(kMagic.data(), kMagic.size()));
    file.u32(kIndexFormatVersion);
    file.u32(4);
    write_section(file, Section::stats, stats.take());
    write_section(file, Section::docs, docs.take());
    write_section(file, Section::terms, terms.take());
    write_section(file, Section::postings, postings.take());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open index file for writing: " + path.string());
    }
    out.write(file.bytes().data(), static_cast<std::streamsize>(file.bytes().size()));
    out.close();
    if (!out) {
        throw DataError("I/O error while writing index file: " + path.string());
    }
}

InvertedIndex load_index(const std::filesystem::path& path) {
    const std::string context = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open index file: " + context);
    }
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw DataError("I/O error while reading index file: " + context);
    }

    Reader file(data, context);
    if (data.size() < kMagic.size() || std::memcmp(data.data(), kMagic.data(), kMagic.size()) != 0) {
        throw FormatError(context + ": not a bmx index file (bad magic bytes)");
    }
    file.bytes(kMagic.size());
    const auto version = file.u32();
    if (version != kIndexFormatVersion) {
        throw FormatError(context + ": unsupported version " + std::to_string(version) + " (expected " +
                          std::to_string(kIndexFormatVersion) + ")");
    }
    if (const auto sections = file.u32(); sections != 4) {
        throw FormatError(context + ": expected 4 sections, found " + std::to_string(sections));
    }

    Reader stats(read_section(file, Section::stats, context), context + " [stats]");
    Reader docs(read_section(file, Section::docs, context), context + " [docs]");
    Reader terms(read_section(file, Section::terms, context), context + " [terms]");
    Reader postings(read_section(file, Section::postings, context), context + " [postings]");
    if (!file.at_end()) {
        throw FormatError(context + ": trailing bytes after last section");
    }

    InvertedIndex index;
    const auto n = stats.u64();
    index.total_length_ = stats.u64();
    index.avg_doc_length_ = stats.f64();
    index.pipeline_fingerprint_ = stats.u64();
    const auto vocab = stats.u64();
    const auto posting_count = stats.u64();
    if (!stats.at_end()) {
        throw FormatError(context + ": malformed stats section");
    }
    if (n > std::numeric_limits<DocId>::max()) {
        throw FormatError(context + ": document count out of range");
    }

    // Every record needs at least 8 bytes, which bounds the reserve calls below.
    docs.need(n * 8);
    index.doc_lengths_.reserve(n);
    index.external_ids_.reserve(n);
    for (std::uint64_t d = 0; d < n; ++d) {
        index.doc_lengths_.push_back(docs.u32());
        index.external_ids_.push_back(docs.str());
    }
    if (!docs.at_end()) {
        throw FormatError(context + ": malformed docs section");
    }

    if (vocab > terms.remaining() / 8 || posting_count > postings.remaining() / 8) {
        throw FormatError(context + ": term or posting count exceeds section size");
    }
    index.terms_.reserve(vocab);
    index.term_offsets_.reserve(vocab + 1);
    index.postings_.reserve(posting_count);
    index.term_offsets_.assign(1, 0);
    for (std::uint64_t t = 0; t < vocab; ++t) {
        index.terms_.push_back(terms.str());
        const auto df = terms.u32();
        for (std::uint32_t i = 0; i < df; ++i) {
            Posting p;
            p.doc_id = postings.u32();
            p.tf = postings.u32();
            index.postings_.push_back(p);
        }
        index.term_offsets_.push_back(index.postings_.size());
    }
    if (!terms.at_end() || !postings.at_end() || index.postings_.size() != posting_count) {
        throw FormatError(context + ": term dictionary and postings sections disagree");
    }

    index.rebuild_lookup_tables();
    try {
        index.check_invariants();
    } catch (const DataError& e) {
        throw FormatError(context + ": " + e.what());
    }
    return index;
}

} // namespace bmx
