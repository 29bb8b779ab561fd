#include "poseforge/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace poseforge {

namespace {

unsigned char quantize(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void put_u32_be(std::vector<unsigned char>& buf, std::uint32_t v) {
    buf.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
    buf.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    buf.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    buf.push_back(static_cast<unsigned char>(v & 0xff));
}

void png_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
    put_u32_be(out, crc);
}

struct GrayFrame {
    int w = 0, h = 0;
    std::vector<unsigned char> pixels;
};

GrayFrame to_gray(const Tensor& image) {
    GrayFrame f;
    if (image.rank() == 2) {
        f.h = image.dim(0);
        f.w = image.dim(1);
        f.pixels.resize(static_cast<std::size_t>(f.w) * f.h);
        for (std::int64_t i = 0; i < image.size(); ++i) f.pixels[static_cast<std::size_t>(i)] = quantize(image[i]);
    } else if (image.rank() == 3 && image.dim(0) == 3) {
        f.h = image.dim(1);
        f.w = image.dim(2);
        f.pixels.resize(static_cast<std::size_t>(f.w) * f.h);
        std::int64_t hw = static_cast<std::int64_t>(f.w) * f.h;
        for (std::int64_t i = 0; i < hw; ++i)
            f.pixels[static_cast<std::size_t>(i)] = quantize((image[i] + image[hw + i] + image[2 * hw + i]) / 3.0);
    } else {
        throw std::invalid_argument("image must be {h,w} or {3,h,w}, got " + shape_str(image.shape()));
    }
    return f;
}

// Minimal LZW for GIF image data blocks.
class GifLzw {
public:
    explicit GifLzw(std::vector<unsigned char>& out) : out_(out) {}

    void encode(const std::vector<unsigned char>& pixels) {
        const int min_code = 8;
        out_.push_back(static_cast<unsigned char>(min_code));
        const int clear = 1 << min_code;
        const int eoi = clear + 1;
        reset(clear);

        emit(clear);
        int prefix = -1;
        for (unsigned char p : pixels) {
            if (prefix < 0) {
                prefix = p;
                continue;
            }
            auto key = (static_cast<std::uint32_t>(prefix) << 8) | p;
            auto it = table_.find(key);
            if (it != table_.end()) {
                prefix = it->second;
            } else {
                emit(prefix);
                if (next_code_ < 4096) {
                    table_[key] = next_code_++;
                    if (next_code_ - 1 == (1 << code_bits_) && code_bits_ < 12) ++code_bits_;
                } else {
                    emit(clear);
                    reset(clear);
                }
                prefix = p;
            }
        }
        if (prefix >= 0) emit(prefix);
        emit(eoi);
        flush_bits();
        flush_block();
        out_.push_back(0);  // block terminator
    }

private:
    void reset(int clear) {
        table_.clear();
        next_code_ = clear + 2;
        code_bits_ = 9;
    }

    void emit(int code) {
        bit_buf_ |= static_cast<std::uint32_t>(code) << bit_count_;
        bit_count_ += code_bits_;
        while (bit_count_ >= 8) {
            block_.push_back(static_cast<unsigned char>(bit_buf_ & 0xff));
            bit_buf_ >>= 8;
            bit_count_ -= 8;
            if (block_.size() == 255) flush_block();
        }
    }

    void flush_bits() {
        if (bit_count_ > 0) {
            block_.push_back(static_cast<unsigned char>(bit_buf_ & 0xff));
            bit_buf_ = 0;
            bit_count_ = 0;
            if (block_.size() == 255) flush_block();
        }
    }

    void flush_block() {
        if (block_.empty()) return;
        out_.push_back(static_cast<unsigned char>(block_.size()));
        out_.insert(out_.end(), block_.begin(), block_.end());
        block_.clear();
    }

    std::vector<unsigned char>& out_;
    std::vector<unsigned char> block_;
    std::unordered_map<std::uint32_t, int> table_;
    std::uint32_t bit_buf_ = 0;
    int bit_count_ = 0;
    int next_code_ = 0;
    int code_bits_ = 9;
};

}  // namespace

void write_png(const std::string& path, const Tensor& image) {
    int w, h;
    std::vector<unsigned char> raw;  // filter byte + RGB scanlines
    if (image.rank() == 3 && image.dim(0) == 3) {
        h = image.dim(1);
        w = image.dim(2);
        std::int64_t hw = static_cast<std::int64_t>(w) * h;
        raw.reserve(static_cast<std::size_t>(h) * (1 + 3 * static_cast<std::size_t>(w)));
        for (int r = 0; r < h; ++r) {
            raw.push_back(0);
            for (int c = 0; c < w; ++c) {
                std::int64_t i = static_cast<std::int64_t>(r) * w + c;
                raw.push_back(quantize(image[i]));
                raw.push_back(quantize(image[hw + i]));
                raw.push_back(quantize(image[2 * hw + i]));
            }
        }
    } else if (image.rank() == 2) {
        h = image.dim(0);
        w = image.dim(1);
        for (int r = 0; r < h; ++r) {
            raw.push_back(0);
            for (int c = 0; c < w; ++c) {
                unsigned char v = quantize(image[static_cast<std::int64_t>(r) * w + c]);
                raw.push_back(v);
                raw.push_back(v);
                raw.push_back(v);
            }
        }
    } else {
        throw std::invalid_argument("write_png: image must be {h,w} or {3,h,w}");
    }

    uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_cap);
    if (compress2(comp.data(), &comp_cap, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw std::runtime_error("write_png: compression failure");
    comp.resize(comp_cap);

    std::vector<unsigned char> out;
    const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.insert(out.end(), sig, sig + 8);

    std::vector<unsigned char> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(w));
    put_u32_be(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // truecolor
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // no interlace
    png_chunk(out, "IHDR", ihdr);
    png_chunk(out, "IDAT", comp);
    png_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_png: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write_png: write failure on " + path);
}

void write_gif(const std::string& path, const std::vector<Tensor>& frames, int delay_cs) {
    if (frames.empty()) throw std::invalid_argument("write_gif: no frames");
    std::vector<GrayFrame> gray;
    for (const Tensor& f : frames) gray.push_back(to_gray(f));
    const int w = gray.front().w;
    const int h = gray.front().h;
    for (const GrayFrame& f : gray)
        if (f.w != w || f.h != h) throw std::invalid_argument("write_gif: frame sizes differ");

    std::vector<unsigned char> out;
    const char* header = "GIF89a";
    out.insert(out.end(), header, header + 6);
    out.push_back(static_cast<unsigned char>(w & 0xff));
    out.push_back(static_cast<unsigned char>((w >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>(h & 0xff));
    out.push_back(static_cast<unsigned char>((h >> 8) & 0xff));
    out.push_back(0xf7);  // global color table, 256 entries, 8-bit color
    out.push_back(0);     // background
    out.push_back(0);     // aspect
    for (int i = 0; i < 256; ++i) {
        out.push_back(static_cast<unsigned char>(i));
        out.push_back(static_cast<unsigned char>(i));
        out.push_back(static_cast<unsigned char>(i));
    }

    // Netscape looping extension.
    const unsigned char loop[] = {0x21, 0xff, 0x0b, 'N', 'E', 'T', 'S', 'C', 'A', 'P',
                                  'E',  '2',  '.',  '0', 3,   1,   0,   0,   0};
    out.insert(out.end(), loop, loop + sizeof(loop));

    for (const GrayFrame& f : gray) {
        const unsigned char gce[] = {0x21, 0xf9, 4, 0,
                                     static_cast<unsigned char>(delay_cs & 0xff),
                                     static_cast<unsigned char>((delay_cs >> 8) & 0xff), 0, 0};
        out.insert(out.end(), gce, gce + sizeof(gce));
        out.push_back(0x2c);  // image descriptor
        for (int v : {0, 0, w, h}) {
            out.push_back(static_cast<unsigned char>(v & 0xff));
            out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
        }
        out.push_back(0);  // no local color table
        GifLzw lzw(out);
        lzw.encode(f.pixels);
    }
    out.push_back(0x3b);  // trailer

    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("write_gif: cannot open " + path);
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw std::runtime_error("write_gif: write failure on " + path);
}

}  // namespace poseforge
