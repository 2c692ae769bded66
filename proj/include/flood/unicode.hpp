#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flood {

// Minimal UTF-8 handling, enough to filter code points by category.
// Invalid byte sequences are passed through unchanged: cleaning is a total
// function over arbitrary input.

struct Utf8Unit {
    uint32_t cp = 0;        // decoded code point, 0xFFFFFFFF when raw byte
    std::string bytes;      // original encoding
    bool valid = false;
};

inline std::vector<Utf8Unit> utf8_decode(const std::string& s) {
    std::vector<Utf8Unit> out;
    size_t i = 0;
    const size_t n = s.size();
    while (i < n) {
        unsigned char b0 = static_cast<unsigned char>(s[i]);
        size_t len = 0;
        uint32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        }
        bool ok = len > 0 && i + len <= n;
        if (ok) {
            for (size_t k = 1; k < len; ++k) {
                unsigned char bk = static_cast<unsigned char>(s[i + k]);
                if ((bk & 0xC0) != 0x80) {
                    ok = false;
                    break;
                }
                cp = (cp << 6) | (bk & 0x3F);
            }
        }
        if (ok && len == 2 && cp < 0x80) ok = false;          // overlong
        if (ok && len == 3 && cp < 0x800) ok = false;
        if (ok && len == 4 && cp < 0x10000) ok = false;
        if (ok && (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) ok = false;
        Utf8Unit u;
        if (ok) {
            u.cp = cp;
            u.valid = true;
            u.bytes = s.substr(i, len);
            i += len;
        } else {
            u.cp = 0xFFFFFFFF;
            u.valid = false;
            u.bytes = s.substr(i, 1);
            i += 1;
        }
        out.push_back(std::move(u));
    }
    return out;
}

inline void utf8_append(std::string& out, uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// Unicode general category Cc (control).
inline bool is_control_cp(uint32_t cp) {
    return cp <= 0x1F || (cp >= 0x7F && cp <= 0x9F);
}

// Unicode general category Cf (format): soft hyphen, directional marks,
// zero-width characters, BOM and friends.
inline bool is_format_cp(uint32_t cp) {
    static const uint32_t ranges[][2] = {
        {0x00AD, 0x00AD}, {0x0600, 0x0605}, {0x061C, 0x061C}, {0x06DD, 0x06DD},
        {0x070F, 0x070F}, {0x0890, 0x0891}, {0x08E2, 0x08E2}, {0x180E, 0x180E},
        {0x200B, 0x200F}, {0x202A, 0x202E}, {0x2060, 0x2064}, {0x2066, 0x206F},
        {0xFEFF, 0xFEFF}, {0xFFF9, 0xFFFB}, {0x110BD, 0x110BD}, {0x110CD, 0x110CD},
        {0x13430, 0x1343F}, {0x1BCA0, 0x1BCA3}, {0x1D173, 0x1D17A},
        {0xE0001, 0xE0001}, {0xE0020, 0xE007F},
    };
    for (const auto& r : ranges) {
        if (cp >= r[0] && cp <= r[1]) return true;
    }
    return false;
}

}  // namespace flood
