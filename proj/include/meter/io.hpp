#pragma once

// File formats: mono/stereo PCM WAV, tab-separated beat lists, small CSV helpers.

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "meter/core.hpp"

namespace meter::io {

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

// Reads 8/16/24/32-bit integer PCM or 32/64-bit float WAV; channels are averaged.
inline AudioBuffer read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open audio file " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto fail = [&](const std::string& why) { return Error("bad_wav", path.string() + ": " + why); };
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw fail("not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = detail::read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (avail < 16) throw fail("short fmt chunk");
            format = detail::read_u16(bytes.data() + body);
            channels = detail::read_u16(bytes.data() + body + 2);
            rate = detail::read_u32(bytes.data() + body + 4);
            bits = detail::read_u16(bytes.data() + body + 14);
            if (format == 0xFFFE && avail >= 26) format = detail::read_u16(bytes.data() + body + 24);
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            data_size = avail;
        }
        pos = body + size + (size & 1u);
    }
    if (channels == 0 || rate == 0) throw fail("missing fmt chunk");
    if (data == nullptr) throw fail("missing data chunk");
    if (format != 1 && format != 3) throw fail("unsupported sample format " + std::to_string(format));

    const std::size_t width = bits / 8;
    if (width == 0 || (format == 3 && width != 4 && width != 8) || (format == 1 && width > 4))
        throw fail("unsupported bit depth " + std::to_string(bits));
    const std::size_t frames = data_size / (width * channels);

    AudioBuffer out;
    out.sample_rate = static_cast<int>(rate);
    out.samples.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + (f * channels + c) * width;
            double v = 0.0;
            if (format == 3 && width == 4) {
                float x;
                std::memcpy(&x, p, 4);
                v = x;
            } else if (format == 3) {
                std::memcpy(&v, p, 8);
            } else if (width == 1) {
                v = (static_cast<int>(p[0]) - 128) / 128.0;
            } else if (width == 2) {
                v = static_cast<std::int16_t>(detail::read_u16(p)) / 32768.0;
            } else if (width == 3) {
                std::int32_t x = p[0] | (p[1] << 8) | (p[2] << 16);
                if (x & 0x800000) x |= ~0xffffff;
                v = x / 8388608.0;
            } else {
                v = static_cast<std::int32_t>(detail::read_u32(p)) / 2147483648.0;
            }
            acc += v;
        }
        out.samples[f] = acc / channels;
    }
    return out;
}

// Mono 16-bit PCM. Samples are clipped to [-1, 1].
inline void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
    std::string buf;
    const auto n = static_cast<std::uint32_t>(audio.samples.size());
    buf.reserve(44 + 2 * static_cast<std::size_t>(n));
    buf += "RIFF";
    detail::put_u32(buf, 36 + 2 * n);
    buf += "WAVEfmt ";
    detail::put_u32(buf, 16);
    detail::put_u16(buf, 1);
    detail::put_u16(buf, 1);
    detail::put_u32(buf, static_cast<std::uint32_t>(audio.sample_rate));
    detail::put_u32(buf, static_cast<std::uint32_t>(audio.sample_rate) * 2);
    detail::put_u16(buf, 2);
    detail::put_u16(buf, 16);
    buf += "data";
    detail::put_u32(buf, 2 * n);
    for (double s : audio.samples) {
        const double c = std::clamp(s, -1.0, 1.0);
        const auto q = static_cast<std::int16_t>(std::clamp(std::lround(c * 32768.0), -32768L, 32767L));
        detail::put_u16(buf, static_cast<std::uint16_t>(q));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error("io", "write failed for " + path.string());
}

// Beat list text format: one event per line, "time<TAB>position". Time in
// seconds with six decimals; position omitted for beat-only lists. Reading
// also accepts space or comma separators and '#' comments.
inline std::string format_beats(const BeatList& beats) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6);
    for (const auto& e : beats.events) {
        os << e.time;
        if (e.position > 0) os << '\t' << e.position;
        os << '\n';
    }
    return os.str();
}

inline BeatList parse_beats(std::string_view text, const std::string& source = "<string>") {
    BeatList out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string line(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        for (char& c : line)
            if (c == ',' || c == '\t' || c == '\r') c = ' ';
        std::istringstream ls(line);
        std::string t_tok, p_tok, extra;
        if (!(ls >> t_tok)) {
            if (end == text.size()) break;
            continue;
        }
        ls >> p_tok;
        BeatEvent ev;
        const auto bad = [&](const std::string& why) {
            return Error("bad_annotation", source + ":" + std::to_string(line_no) + ": " + why);
        };
        try {
            std::size_t used = 0;
            ev.time = std::stod(t_tok, &used);
            if (used != t_tok.size()) throw bad("unparsable time '" + t_tok + "'");
        } catch (const std::logic_error&) {
            throw bad("unparsable time '" + t_tok + "'");
        }
        if (!std::isfinite(ev.time) || ev.time < 0.0) throw bad("time must be finite and non-negative");
        if (!p_tok.empty()) {
            try {
                std::size_t used = 0;
                // Accept "3" as well as "3.0"; bar.beat labels are not supported.
                const double p = std::stod(p_tok, &used);
                if (used != p_tok.size() || p != std::floor(p) || p < 1.0) throw bad("bad position '" + p_tok + "'");
                ev.position = static_cast<int>(p);
            } catch (const std::logic_error&) {
                throw bad("bad position '" + p_tok + "'");
            }
        }
        if (!out.events.empty() && !(ev.time > out.events.back().time))
            throw bad("times must be strictly increasing");
        out.events.push_back(ev);
        if (end == text.size()) break;
    }
    int max_pos = 0;
    for (const auto& e : out.events) max_pos = std::max(max_pos, e.position);
    if (max_pos > 0) out.beats_per_bar = max_pos;
    return out;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("io", "write failed for " + path.string());
}

inline BeatList read_beats(const std::filesystem::path& path) {
    return parse_beats(read_text(path), path.string());
}

inline void write_beats(const std::filesystem::path& path, const BeatList& beats) {
    write_text(path, format_beats(beats));
}

// Fixed-precision number formatting for CSV output.
inline std::string fmt(double v, int decimals = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace meter::io
