#include "bmx/text_pipeline.hpp"

#include "bmx/error.hpp"

#include <fstream>
#include <string>

namespace bmx {

namespace {

constexpr char32_t kInvalid = 0xFFFD;

/// Decodes one code point starting at `pos` and advances it. Malformed
/// sequences consume one byte and decode to U+FFFD.
char32_t next_code_point(std::string_view s, std::size_t& pos) {
    const auto lead = static_cast<unsigned char>(s[pos]);
    if (lead < 0x80) {
        ++pos;
        return lead;
    }
    int extra = 0;
    char32_t cp = 0;
    if ((lead & 0xE0) == 0xC0) {
        extra = 1;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        extra = 2;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        extra = 3;
        cp = lead & 0x07;
    } else {
        ++pos;
        return kInvalid;
    }
    if (pos + extra >= s.size()) {
        ++pos;
        return kInvalid;
    }
    for (int i = 1; i <= extra; ++i) {
        const auto c = static_cast<unsigned char>(s[pos + i]);
        if ((c & 0xC0) != 0x80) {
            ++pos;
            return kInvalid;
        }
        cp = (cp << 6) | (c & 0x3F);
    }
    static constexpr char32_t min_for_len[] = {0, 0x80, 0x800, 0x10000};
    if (cp < min_for_len[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        ++pos;
        return kInvalid;
    }
    pos += extra + 1;
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_space(char32_t cp) {
    return cp <= 0x20 || (cp >= 0x7F && cp <= 0xA0) || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200D) ||
           cp == 0x2028 || cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x2060 || cp == 0x3000 ||
           cp == 0xFEFF;
}

bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

/// Script-level punctuation inside otherwise alphabetic blocks.
bool is_script_punctuation(char32_t cp) {
    return cp == 0x37E || cp == 0x387 || in(cp, 0x55A, 0x55F) || cp == 0x589 || cp == 0x5BE || cp == 0x5C0 ||
           cp == 0x5C3 || cp == 0x5C6 || in(cp, 0x5F3, 0x5F4) || in(cp, 0x609, 0x60D) || cp == 0x61B ||
           in(cp, 0x61E, 0x61F) || in(cp, 0x66A, 0x66D) || cp == 0x6D4 || in(cp, 0x964, 0x965) || cp == 0x970 ||
           cp == 0xE4F || in(cp, 0xE5A, 0xE5B) || in(cp, 0x104A, 0x104F) || cp == 0x10FB || in(cp, 0x1360, 0x1368) ||
           cp == 0x166E || in(cp, 0x169B, 0x169C) || in(cp, 0x16EB, 0x16ED) || in(cp, 0x17D4, 0x17DA) ||
           in(cp, 0x1800, 0x180A);
}

/// Letters, digits and combining marks. Everything else that is not space
/// is punctuation or a symbol.
bool is_word_char(char32_t cp) {
    if (cp < 0x80) {
        return in(cp, '0', '9') || in(cp, 'a', 'z') || in(cp, 'A', 'Z');
    }
    if (cp < 0xC0) {
        return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
    }
    if (cp == 0xD7 || cp == 0xF7) {
        return false;
    }
    if (cp < 0x2000) {
        return !is_script_punctuation(cp);
    }
    if (cp < 0x2C00) {
        return false; // general punctuation, symbols, arrows, math, box drawing
    }
    if (in(cp, 0x2E00, 0x2E7F)) {
        return false;
    }
    if (in(cp, 0x3000, 0x303F)) {
        return in(cp, 0x3005, 0x3007);
    }
    if (in(cp, 0xD800, 0xF8FF)) {
        return false; // surrogates and private use
    }
    if (in(cp, 0xFE10, 0xFE1F) || in(cp, 0xFE30, 0xFE6F)) {
        return false;
    }
    if (in(cp, 0xFF00, 0xFFEF)) {
        return in(cp, 0xFF10, 0xFF19) || in(cp, 0xFF21, 0xFF3A) || in(cp, 0xFF41, 0xFF5A) || in(cp, 0xFF66, 0xFFDC);
    }
    if (in(cp, 0xFFF0, 0xFFFF)) {
        return false;
    }
    if (in(cp, 0x1F000, 0x1FAFF)) {
        return false; // emoji and pictographs
    }
    return true;
}

char32_t to_lower(char32_t cp) {
    if (in(cp, 'A', 'Z')) {
        return cp + 32;
    }
    if (cp < 0xC0) {
        return cp;
    }
    if (in(cp, 0xC0, 0xDE) && cp != 0xD7) {
        return cp + 32;
    }
    if (in(cp, 0x100, 0x137) || in(cp, 0x14A, 0x177)) {
        return cp | 1;
    }
    if (in(cp, 0x139, 0x148) || in(cp, 0x179, 0x17E)) {
        return (cp % 2 == 1) ? cp + 1 : cp;
    }
    if (cp == 0x178) {
        return 0xFF;
    }
    if (in(cp, 0x391, 0x3A9) && cp != 0x3A2) {
        return cp + 32;
    }
    if (cp == 0x386) {
        return 0x3AC;
    }
    if (in(cp, 0x388, 0x38A)) {
        return cp + 37;
    }
    if (cp == 0x38C) {
        return 0x3CC;
    }
    if (in(cp, 0x38E, 0x38F)) {
        return cp + 63;
    }
    if (in(cp, 0x400, 0x40F)) {
        return cp + 80;
    }
    if (in(cp, 0x410, 0x42F)) {
        return cp + 32;
    }
    if (in(cp, 0x460, 0x481) || in(cp, 0x48A, 0x4BF)) {
        return cp | 1;
    }
    return cp;
}

bool is_ascii(std::string_view s) {
    for (char c : s) {
        if (static_cast<unsigned char>(c) >= 0x80) {
            return false;
        }
    }
    return true;
}

std::vector<std::string> split(std::string_view text, const PipelineConfig& config) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    };

    std::size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = next_code_point(text, pos);
        if (config.lowercase) {
            cp = to_lower(cp);
        }
        if (is_space(cp)) {
            flush();
        } else if (is_word_char(cp)) {
            append_utf8(current, cp);
        } else if (config.strip_punctuation) {
            flush();
        } else if (config.token_splitter == TokenSplitter::unicode_words) {
            flush();
            std::string single;
            append_utf8(single, cp);
            out.push_back(std::move(single));
        } else {
            append_utf8(current, cp);
        }
    }
    flush();
    return out;
}

std::string stem_to_fixed_point(std::string token) {
    constexpr int kMaxRounds = 16;
    for (int round = 0; round < kMaxRounds; ++round) {
        std::string next = porter_stem(token);
        if (next == token) {
            break;
        }
        token = std::move(next);
    }
    return token;
}

} // namespace

const StopwordSet& english_stopwords() {
    static const StopwordSet words = {
#include "stopwords_english.inc"
    };
    return words;
}

StopwordSet load_stopword_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read stopword file: " + path);
    }
    StopwordSet words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
            line.pop_back();
        }
        const auto start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') {
            continue;
        }
        words.insert(line.substr(start));
    }
    return words;
}

std::uint64_t fingerprint(const PipelineConfig& config) {
    std::string canonical = "bmx-pipeline-v1";
    canonical += ";lowercase=" + std::to_string(config.lowercase);
    canonical += ";strip_punctuation=" + std::to_string(config.strip_punctuation);
    canonical += ";stemmer=" + std::string(to_string(config.stemmer));
    canonical += ";splitter=" + std::string(to_string(config.token_splitter));
    canonical += ";stopwords=";
    for (const auto& w : config.stopwords) {
        canonical += w;
        canonical.push_back('\n');
    }
    // FNV-1a
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

Stemmer parse_stemmer(std::string_view name) {
    if (name == "none") {
        return Stemmer::none;
    }
    if (name == "porter-english" || name == "porter") {
        return Stemmer::porter_english;
    }
    throw ConfigError("unknown stemmer '" + std::string(name) + "' (expected none|porter-english)");
}

TokenSplitter parse_token_splitter(std::string_view name) {
    if (name == "unicode-words") {
        return TokenSplitter::unicode_words;
    }
    if (name == "whitespace") {
        return TokenSplitter::whitespace;
    }
    throw ConfigError("unknown token splitter '" + std::string(name) + "' (expected unicode-words|whitespace)");
}

std::string_view to_string(Stemmer stemmer) {
    return stemmer == Stemmer::none ? "none" : "porter-english";
}

std::string_view to_string(TokenSplitter splitter) {
    return splitter == TokenSplitter::unicode_words ? "unicode-words" : "whitespace";
}

TokenSeq tokenize(std::string_view text, const PipelineConfig& config) {
    TokenSeq seq;
    const bool stemming = config.stemmer == Stemmer::porter_english;
    for (auto& token : split(text, config)) {
        if (config.stopwords.contains(token)) {
            continue;
        }
        if (stemming && is_ascii(token)) {
            token = stem_to_fixed_point(std::move(token));
            // A stem can coincide with a stopword ("ones" -> "on").
            if (token.empty() || config.stopwords.contains(token)) {
                continue;
            }
        }
        seq.tokens.push_back(std::move(token));
    }
    return seq;
}

} // namespace bmx
