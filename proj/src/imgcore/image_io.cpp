#include "hazesplat/image.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hazesplat {

namespace {

std::string lower_ext(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw IoError("truncated header in " + path.string());
    return tok;
}

int header_int(std::istream& in, const std::filesystem::path& path) {
    const std::string tok = header_token(in, path);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw IoError("malformed header field '" + tok + "' in " + path.string());
    }
}

}  // namespace

ImageBuffer read_ppm(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    if (header_token(in, path) != "P6") throw IoError("not a binary P6 file: " + path.string());
    const int width = header_int(in, path);
    const int height = header_int(in, path);
    const int maxval = header_int(in, path);
    if (width <= 0 || height <= 0) throw IoError("bad dimensions in " + path.string());
    if (maxval != 255) throw IoError("unsupported maxval " + std::to_string(maxval) + " in " + path.string());
    // header_token consumed exactly one whitespace byte after maxval.
    ImageBuffer image(height, width, 3);
    std::vector<unsigned char> bytes(image.size());
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw IoError("truncated pixel data in " + path.string());
    for (std::size_t i = 0; i < bytes.size(); ++i) image.data()[i] = static_cast<float>(bytes[i]) / 255.0f;
    return image;
}

void write_ppm(const ImageBuffer& image, const std::filesystem::path& path) {
    if (image.channels() != 3) throw InvariantError("P6 output needs a 3-channel image");
    std::ofstream out = open_out(path);
    out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
    std::vector<unsigned char> bytes(image.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const float v = std::clamp(image.data()[i], 0.0f, 1.0f);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

ImageBuffer read_pfm(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    const std::string magic = header_token(in, path);
    if (magic != "Pf") throw IoError("only single-channel PFM (Pf) is supported: " + path.string());
    const int width = header_int(in, path);
    const int height = header_int(in, path);
    const std::string scale_tok = header_token(in, path);
    double scale = 0.0;
    try {
        scale = std::stod(scale_tok);
    } catch (const std::exception&) {
        throw IoError("malformed PFM scale in " + path.string());
    }
    if (width <= 0 || height <= 0 || scale == 0.0) throw IoError("bad PFM header in " + path.string());
    const bool little = scale < 0.0;

    ImageBuffer image(height, width, 1);
    std::vector<std::uint32_t> words(image.size());
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    if (in.gcount() != static_cast<std::streamsize>(words.size() * 4))
        throw IoError("truncated PFM data in " + path.string());
    const bool swap = little != (std::endian::native == std::endian::little);
    // PFM rows are stored bottom-to-top.
    for (int row = 0; row < height; ++row) {
        const int y = height - 1 - row;
        for (int x = 0; x < width; ++x) {
            std::uint32_t w = words[static_cast<std::size_t>(row) * width + x];
            if (swap) w = __builtin_bswap32(w);
            image.at(y, x) = std::bit_cast<float>(w);
        }
    }
    return image;
}

void write_pfm(const ImageBuffer& image, const std::filesystem::path& path) {
    if (image.channels() != 1) throw InvariantError("PFM output needs a single-channel image");
    std::ofstream out = open_out(path);
    out << "Pf\n" << image.width() << ' ' << image.height() << "\n-1.0\n";
    std::vector<std::uint32_t> words(image.size());
    const bool swap = std::endian::native != std::endian::little;
    for (int row = 0; row < image.height(); ++row) {
        const int y = image.height() - 1 - row;
        for (int x = 0; x < image.width(); ++x) {
            std::uint32_t w = std::bit_cast<std::uint32_t>(image.at(y, x));
            if (swap) w = __builtin_bswap32(w);
            words[static_cast<std::size_t>(row) * image.width() + x] = w;
        }
    }
    out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    if (!out) throw IoError("write failed: " + path.string());
}

ImageBuffer read_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("missing file " + path.string());
    const std::string ext = lower_ext(path);
    if (ext == ".pfm") return read_pfm(path);
    if (ext == ".ppm") return read_ppm(path);
    throw IoError("unsupported image extension: " + path.string());
}

void write_image(const ImageBuffer& image, const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".pfm") return write_pfm(image, path);
    if (ext == ".ppm") return write_ppm(image, path);
    throw IoError("unsupported image extension: " + path.string());
}

}  // namespace hazesplat
