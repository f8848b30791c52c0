#include "wafertex/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace wafertex {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t offset, const std::string& what) {
    throw IoError(path.string() + ": " + what + " at byte " + std::to_string(offset));
}

// Cursor over a Netpbm header: whitespace-separated tokens, '#' comments.
class HeaderReader {
public:
    HeaderReader(const std::filesystem::path& path, const std::vector<char>& bytes) : path_(path), bytes_(bytes) {}

    std::string token() {
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
        if (start == pos_) fail(path_, pos_, "unexpected end of header");
        return std::string(bytes_.data() + start, pos_ - start);
    }

    std::size_t count(const char* what) {
        const std::size_t at = position_after_space();
        const std::string t = token();
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc{} || ptr != t.data() + t.size() || v == 0) fail(path_, at, std::string("bad ") + what);
        return v;
    }

    double real(const char* what) {
        const std::size_t at = position_after_space();
        const std::string t = token();
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v) || v == 0.0) {
            fail(path_, at, std::string("bad ") + what);
        }
        return v;
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t raster_start() {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
            fail(path_, pos_, "missing separator before raster");
        }
        return pos_ + 1;
    }

private:
    std::size_t position_after_space() {
        skip_space();
        return pos_;
    }

    void skip_space() {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::filesystem::path& path_;
    const std::vector<char>& bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t load_u32_le(const char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    return v;
}

void store_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

float load_f32(const char* p, bool little) {
    std::uint32_t bits = 0;
    if (little) {
        bits = load_u32_le(p);
    } else {
        for (int i = 0; i < 4; ++i) bits = (bits << 8) | static_cast<unsigned char>(p[i]);
    }
    return std::bit_cast<float>(bits);
}

void store_f32_le(std::string& out, float v) { store_u32_le(out, std::bit_cast<std::uint32_t>(v)); }

void require_single_channel(const Tensor& image, const char* who) {
    if (image.channels() != 1 || image.empty()) {
        throw std::invalid_argument(std::string(who) + ": expected a non-empty single-channel map, got " +
                                    image.shape_string());
    }
}

std::string pgm_bytes(const Tensor& image, unsigned maxval) {
    std::string out = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n" +
                      std::to_string(maxval) + "\n";
    const bool wide = maxval > 255;
    out.reserve(out.size() + image.size() * (wide ? 2 : 1));
    for (const float v : image.data()) {
        if (!std::isfinite(v)) throw std::domain_error("write_pgm: non-finite sample");
        const double clamped = std::clamp(static_cast<double>(std::nearbyint(v)), 0.0, static_cast<double>(maxval));
        const auto q = static_cast<unsigned>(clamped);
        if (wide) out.push_back(static_cast<char>(q >> 8));
        out.push_back(static_cast<char>(q & 0xFFu));
    }
    return out;
}

}  // namespace

std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open for reading");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError(path.string() + ": read error");
    return bytes;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(tmp.string() + ": cannot open for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError(tmp.string() + ": write error");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError(path.string() + ": cannot move temp file into place");
    }
}

Tensor read_pgm(const std::filesystem::path& path) {
    const std::vector<char> bytes = read_file(path);
    HeaderReader header(path, bytes);
    if (header.token() != "P5") fail(path, 0, "not a binary PGM (P5)");
    const std::size_t width = header.count("width");
    const std::size_t height = header.count("height");
    const std::size_t maxval = header.count("maxval");
    if (maxval != 255 && maxval != 65535) fail(path, 0, "unsupported maxval " + std::to_string(maxval));
    const std::size_t start = header.raster_start();
    const std::size_t sample = maxval > 255 ? 2 : 1;
    const std::size_t need = width * height * sample;
    if (bytes.size() - start < need) fail(path, bytes.size(), "truncated raster");
    Tensor out(1, height, width);
    for (std::size_t i = 0; i < width * height; ++i) {
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + start + i * sample);
        out[i] = static_cast<float>(sample == 2 ? (p[0] << 8) | p[1] : p[0]);
    }
    return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& image, unsigned maxval) {
    require_single_channel(image, "write_pgm");
    if (maxval != 255 && maxval != 65535) throw std::invalid_argument("write_pgm: maxval must be 255 or 65535");
    write_file_atomic(path, pgm_bytes(image, maxval));
}

Mask read_mask_pgm(const std::filesystem::path& path) {
    const Tensor t = read_pgm(path);
    Mask m(1, t.height(), t.width());
    for (std::size_t i = 0; i < t.size(); ++i) m[i] = t[i] > 0.0f ? 1 : 0;
    return m;
}

void write_mask_pgm(const std::filesystem::path& path, const Mask& mask) {
    Tensor t(1, mask.height(), mask.width());
    for (std::size_t i = 0; i < mask.size(); ++i) t[i] = mask[i] ? 255.0f : 0.0f;
    write_pgm(path, t, 255);
}

Tensor read_pfm(const std::filesystem::path& path) {
    const std::vector<char> bytes = read_file(path);
    HeaderReader header(path, bytes);
    const std::string magic = header.token();
    if (magic != "Pf") fail(path, 0, magic == "PF" ? "colour PFM not supported" : "not a grayscale PFM (Pf)");
    const std::size_t width = header.count("width");
    const std::size_t height = header.count("height");
    const double scale = header.real("scale");
    const std::size_t start = header.raster_start();
    const bool little = scale < 0.0;
    if (bytes.size() - start < width * height * 4) fail(path, bytes.size(), "truncated raster");
    Tensor out(1, height, width);
    const char* p = bytes.data() + start;
    for (std::size_t row = 0; row < height; ++row) {
        const std::size_t y = height - 1 - row;
        for (std::size_t x = 0; x < width; ++x, p += 4) out.at(0, y, x) = load_f32(p, little);
    }
    return out;
}

void write_pfm(const std::filesystem::path& path, const Tensor& image) {
    require_single_channel(image, "write_pfm");
    std::string out = "Pf\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n-1.0\n";
    out.reserve(out.size() + image.size() * 4);
    for (std::size_t row = 0; row < image.height(); ++row) {
        const std::size_t y = image.height() - 1 - row;
        for (std::size_t x = 0; x < image.width(); ++x) store_f32_le(out, image.at(0, y, x));
    }
    write_file_atomic(path, out);
}

void write_heatmap(const std::filesystem::path& path, const Tensor& map) {
    require_single_channel(map, "write_heatmap");
    const auto [lo_it, hi_it] = std::minmax_element(map.data().begin(), map.data().end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw std::domain_error("write_heatmap: non-finite sample");
    const double span = hi > lo ? hi - lo : 1.0;
    Tensor scaled(1, map.height(), map.width());
    for (std::size_t i = 0; i < map.size(); ++i) {
        scaled[i] = static_cast<float>(255.0 * (map[i] - lo) / span);
    }
    char range[96];
    std::snprintf(range, sizeof(range), "min=%.6f\nmax=%.6f\n", lo, hi);
    std::filesystem::path sidecar = path;
    sidecar += ".range.txt";
    write_pgm(path, scaled, 255);
    write_file_atomic(sidecar, range);
}

NamedTensors read_tensors(const std::filesystem::path& path) {
    const std::vector<char> bytes = read_file(path);
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
        if (bytes.size() - pos < n) fail(path, pos, "truncated tensor file");
    };
    auto u32 = [&] {
        need(4);
        const std::uint32_t v = load_u32_le(bytes.data() + pos);
        pos += 4;
        return v;
    };
    need(4);
    if (std::memcmp(bytes.data(), "WTNS", 4) != 0) fail(path, 0, "bad magic, expected WTNS");
    pos = 4;
    const std::uint32_t count = u32();
    NamedTensors out;
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::uint32_t name_len = u32();
        need(name_len);
        std::string name(bytes.data() + pos, name_len);
        pos += name_len;
        const std::size_t rank_at = pos;
        if (u32() != 3) fail(path, rank_at, "tensor rank must be 3");
        const std::size_t c = u32(), h = u32(), w = u32();
        need(c * h * w * 4);
        Tensor tensor(c, h, w);
        for (std::size_t i = 0; i < tensor.size(); ++i, pos += 4) tensor[i] = load_f32(bytes.data() + pos, true);
        out.emplace_back(std::move(name), std::move(tensor));
    }
    if (pos != bytes.size()) fail(path, pos, "trailing bytes after last tensor");
    return out;
}

void write_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
    std::string out = "WTNS";
    store_u32_le(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        store_u32_le(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        store_u32_le(out, 3);
        store_u32_le(out, static_cast<std::uint32_t>(t.channels()));
        store_u32_le(out, static_cast<std::uint32_t>(t.height()));
        store_u32_le(out, static_cast<std::uint32_t>(t.width()));
        for (const float v : t.data()) store_f32_le(out, v);
    }
    write_file_atomic(path, out);
}

}  // namespace wafertex
