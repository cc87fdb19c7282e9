#include "topoembed/geotiff.hpp"

#include "topoembed/error.hpp"
#include "topoembed/util.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>
#include <sstream>

namespace topoembed {

namespace {

enum Tag : std::uint16_t {
    kImageWidth = 256,
    kImageLength = 257,
    kBitsPerSample = 258,
    kCompression = 259,
    kPhotometric = 262,
    kStripOffsets = 273,
    kSamplesPerPixel = 277,
    kRowsPerStrip = 278,
    kStripByteCounts = 279,
    kPlanarConfig = 284,
    kPredictor = 317,
    kTileWidth = 322,
    kTileLength = 323,
    kTileOffsets = 324,
    kTileByteCounts = 325,
    kSampleFormat = 339,
    kModelPixelScale = 33550,
    kModelTiepoint = 33922,
    kModelTransformation = 34264,
    kGeoKeyDirectory = 34735,
    kGdalMetadata = 42112,
    kGdalNodata = 42113,
};

struct Entry {
    std::uint16_t type = 0;
    std::uint32_t count = 0;
    std::vector<double> numbers;
    std::string text;
};

class Reader {
public:
    explicit Reader(const std::string& bytes) : data_(bytes) {
        require(data_.size() >= 8, ErrorKind::Io, "file too short for TIFF");
        if (data_[0] == 'I' && data_[1] == 'I') {
            big_ = false;
        } else if (data_[0] == 'M' && data_[1] == 'M') {
            big_ = true;
        } else {
            fail(ErrorKind::Io, "not a TIFF file");
        }
        require(u16(2) == 42, ErrorKind::Io, "unsupported TIFF variant (BigTIFF is not handled)");
    }

    std::uint16_t u16(std::size_t off) const {
        check(off, 2);
        auto b = reinterpret_cast<const unsigned char*>(data_.data() + off);
        return big_ ? static_cast<std::uint16_t>(b[0] << 8 | b[1]) : static_cast<std::uint16_t>(b[1] << 8 | b[0]);
    }

    std::uint32_t u32(std::size_t off) const {
        check(off, 4);
        auto b = reinterpret_cast<const unsigned char*>(data_.data() + off);
        if (big_) {
            return std::uint32_t{b[0]} << 24 | std::uint32_t{b[1]} << 16 | std::uint32_t{b[2]} << 8 | b[3];
        }
        return std::uint32_t{b[3]} << 24 | std::uint32_t{b[2]} << 16 | std::uint32_t{b[1]} << 8 | b[0];
    }

    std::uint64_t u64(std::size_t off) const {
        std::uint64_t a = u32(off);
        std::uint64_t b = u32(off + 4);
        return big_ ? (a << 32 | b) : (b << 32 | a);
    }

    bool big_endian() const { return big_; }
    const std::string& data() const { return data_; }

    void check(std::size_t off, std::size_t len) const {
        require(off + len <= data_.size() && off + len >= off, ErrorKind::Io, "TIFF offset beyond end of file");
    }

    std::map<std::uint16_t, Entry> read_ifd() const {
        std::map<std::uint16_t, Entry> entries;
        const std::size_t ifd = u32(4);
        const std::uint16_t n = u16(ifd);
        for (std::uint16_t i = 0; i < n; ++i) {
            const std::size_t e = ifd + 2 + 12u * i;
            Entry entry;
            const std::uint16_t tag = u16(e);
            entry.type = u16(e + 2);
            entry.count = u32(e + 4);
            std::size_t size = type_size(entry.type);
            if (size == 0) {
                continue;
            }
            const std::size_t total = size * entry.count;
            const std::size_t off = total <= 4 ? e + 8 : u32(e + 8);
            check(off, total);
            if (entry.type == 2) {
                entry.text.assign(data_.data() + off, total);
                while (!entry.text.empty() && entry.text.back() == '\0') {
                    entry.text.pop_back();
                }
            } else {
                entry.numbers.reserve(entry.count);
                for (std::uint32_t k = 0; k < entry.count; ++k) {
                    entry.numbers.push_back(number(entry.type, off + k * size));
                }
            }
            entries.emplace(tag, std::move(entry));
        }
        return entries;
    }

private:
    static std::size_t type_size(std::uint16_t type) {
        switch (type) {
        case 1: case 2: case 6: case 7: return 1;
        case 3: case 8: return 2;
        case 4: case 9: case 11: return 4;
        case 5: case 10: case 12: return 8;
        default: return 0;
        }
    }

    double number(std::uint16_t type, std::size_t off) const {
        switch (type) {
        case 1: case 7: return static_cast<unsigned char>(data_[off]);
        case 6: return static_cast<signed char>(data_[off]);
        case 3: return u16(off);
        case 8: return static_cast<std::int16_t>(u16(off));
        case 4: return u32(off);
        case 9: return static_cast<std::int32_t>(u32(off));
        case 5: return static_cast<double>(u32(off)) / u32(off + 4);
        case 10: return static_cast<double>(static_cast<std::int32_t>(u32(off))) / static_cast<std::int32_t>(u32(off + 4));
        case 11: return std::bit_cast<float>(u32(off));
        case 12: return std::bit_cast<double>(u64(off));
        default: return 0.0;
        }
    }

    const std::string& data_;
    bool big_ = false;
};

std::string lzw_decode(std::string_view in, std::size_t expected) {
    std::string out;
    out.reserve(expected);
    std::vector<std::string> table;
    auto reset = [&] {
        table.assign(258, {});
        for (int i = 0; i < 256; ++i) {
            table[static_cast<std::size_t>(i)] = std::string(1, static_cast<char>(i));
        }
    };
    reset();
    std::size_t bitpos = 0;
    int width = 9;
    auto next_code = [&]() -> int {
        if (bitpos + static_cast<std::size_t>(width) > in.size() * 8) {
            return 257;
        }
        int code = 0;
        for (int b = 0; b < width; ++b, ++bitpos) {
            const auto byte = static_cast<unsigned char>(in[bitpos / 8]);
            code = (code << 1) | ((byte >> (7 - bitpos % 8)) & 1);
        }
        return code;
    };
    int prev = -1;
    while (true) {
        int code = next_code();
        if (code == 257) {
            break;
        }
        if (code == 256) {
            reset();
            width = 9;
            prev = -1;
            continue;
        }
        std::string entry;
        if (static_cast<std::size_t>(code) < table.size()) {
            entry = table[static_cast<std::size_t>(code)];
            if (prev >= 0) {
                table.push_back(table[static_cast<std::size_t>(prev)] + entry[0]);
            }
        } else {
            require(prev >= 0 && static_cast<std::size_t>(code) == table.size(), ErrorKind::Io, "corrupt LZW stream");
            const auto& p = table[static_cast<std::size_t>(prev)];
            entry = p + p[0];
            table.push_back(entry);
        }
        out += entry;
        prev = code;
        // Early change: widen one code before the table fills.
        if (table.size() + 1 >= (std::size_t{1} << width) && width < 12) {
            ++width;
        }
        if (out.size() >= expected) {
            break;
        }
    }
    return out;
}

std::string inflate_bytes(std::string_view in, std::size_t expected) {
    std::string out(expected, '\0');
    uLongf len = static_cast<uLongf>(expected);
    int rc = uncompress(reinterpret_cast<Bytef*>(out.data()), &len, reinterpret_cast<const Bytef*>(in.data()),
                        static_cast<uLong>(in.size()));
    require(rc == Z_OK || rc == Z_BUF_ERROR, ErrorKind::Io, "deflate decompression failed");
    out.resize(len);
    return out;
}

double read_sample(const unsigned char* p, int bits, int format, bool big) {
    unsigned char b[8];
    const int nbytes = bits / 8;
    for (int i = 0; i < nbytes; ++i) {
        b[i] = big ? p[nbytes - 1 - i] : p[i];
    }
    std::uint64_t raw = 0;
    for (int i = nbytes - 1; i >= 0; --i) {
        raw = raw << 8 | b[i];
    }
    if (format == 3) {
        return bits == 32 ? static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(raw)))
                          : std::bit_cast<double>(raw);
    }
    if (format == 2) {
        const std::uint64_t sign = std::uint64_t{1} << (bits - 1);
        return static_cast<double>(static_cast<std::int64_t>((raw ^ sign) - sign));
    }
    return static_cast<double>(raw);
}

// Horizontal differencing operates on whole samples in native byte order.
void undo_predictor(std::string& block, int width, int rows, int bits, bool big) {
    const int nbytes = bits / 8;
    for (int r = 0; r < rows; ++r) {
        auto* row = reinterpret_cast<unsigned char*>(block.data()) + static_cast<std::size_t>(r) * width * nbytes;
        for (int c = 1; c < width; ++c) {
            std::uint64_t prev = 0;
            std::uint64_t cur = 0;
            for (int i = 0; i < nbytes; ++i) {
                const int k = big ? i : nbytes - 1 - i;
                prev = prev << 8 | row[(c - 1) * nbytes + k];
                cur = cur << 8 | row[c * nbytes + k];
            }
            std::uint64_t sum = prev + cur;
            for (int i = 0; i < nbytes; ++i) {
                const int k = big ? nbytes - 1 - i : i;
                row[c * nbytes + k] = static_cast<unsigned char>(sum >> (8 * i));
            }
        }
    }
}

std::optional<double> parse_metadata_resolution(const std::string& xml) {
    const std::string key = "name=\"SOURCE_RESOLUTION\">";
    auto pos = xml.find(key);
    if (pos == std::string::npos) {
        return std::nullopt;
    }
    return std::stod(xml.substr(pos + key.size()));
}

} // namespace

ElevationRaster decode_geotiff(const std::string& bytes) {
    Reader reader(bytes);
    auto ifd = reader.read_ifd();
    auto scalar = [&](std::uint16_t tag, double fallback) {
        auto it = ifd.find(tag);
        return it == ifd.end() || it->second.numbers.empty() ? fallback : it->second.numbers.front();
    };
    auto numbers = [&](std::uint16_t tag) -> const std::vector<double>* {
        auto it = ifd.find(tag);
        return it == ifd.end() ? nullptr : &it->second.numbers;
    };

    const int width = static_cast<int>(scalar(kImageWidth, 0));
    const int height = static_cast<int>(scalar(kImageLength, 0));
    const int bits = static_cast<int>(scalar(kBitsPerSample, 8));
    const int compression = static_cast<int>(scalar(kCompression, 1));
    const int format = static_cast<int>(scalar(kSampleFormat, 1));
    const int spp = static_cast<int>(scalar(kSamplesPerPixel, 1));
    const int predictor = static_cast<int>(scalar(kPredictor, 1));
    require(width > 0 && height > 0, ErrorKind::Io, "TIFF missing image dimensions");
    require(spp == 1, ErrorKind::Io, "only single-band rasters are supported");
    require(bits == 8 || bits == 16 || bits == 32 || bits == 64, ErrorKind::Io, "unsupported bits per sample");
    require(format >= 1 && format <= 3 && !(format == 3 && bits < 32), ErrorKind::Io, "unsupported sample format");
    require(compression == 1 || compression == 5 || compression == 8 || compression == 32946, ErrorKind::Io,
            "unsupported TIFF compression " + std::to_string(compression));
    require(predictor == 1 || predictor == 2, ErrorKind::Io, "unsupported TIFF predictor");

    const bool tiled = ifd.contains(kTileOffsets);
    const int block_w = tiled ? static_cast<int>(scalar(kTileWidth, 0)) : width;
    const int block_h = tiled ? static_cast<int>(scalar(kTileLength, 0))
                              : std::min(height, static_cast<int>(scalar(kRowsPerStrip, height)));
    require(block_w > 0 && block_h > 0, ErrorKind::Io, "invalid TIFF block geometry");
    const auto* offsets = numbers(tiled ? kTileOffsets : kStripOffsets);
    const auto* counts = numbers(tiled ? kTileByteCounts : kStripByteCounts);
    require(offsets && counts && offsets->size() == counts->size(), ErrorKind::Io, "TIFF block tables missing");

    const int blocks_x = (width + block_w - 1) / block_w;
    const int blocks_y = (height + block_h - 1) / block_h;
    require(offsets->size() >= static_cast<std::size_t>(blocks_x) * blocks_y, ErrorKind::Io, "TIFF block table short");
    const int nbytes = bits / 8;
    std::vector<float> values(static_cast<std::size_t>(width) * height);

    for (int by = 0; by < blocks_y; ++by) {
        for (int bx = 0; bx < blocks_x; ++bx) {
            const std::size_t idx = static_cast<std::size_t>(by) * blocks_x + bx;
            const auto off = static_cast<std::size_t>((*offsets)[idx]);
            const auto len = static_cast<std::size_t>((*counts)[idx]);
            reader.check(off, len);
            // Strips at the bottom may be short; tiles are always full size.
            const int rows = tiled ? block_h : std::min(block_h, height - by * block_h);
            const std::size_t expected = static_cast<std::size_t>(block_w) * rows * nbytes;
            std::string_view raw(bytes.data() + off, len);
            std::string block;
            if (compression == 1) {
                block.assign(raw);
            } else if (compression == 5) {
                block = lzw_decode(raw, expected);
            } else {
                block = inflate_bytes(raw, expected);
            }
            require(block.size() >= expected, ErrorKind::Io, "TIFF block decoded short");
            if (predictor == 2) {
                undo_predictor(block, block_w, rows, bits, reader.big_endian());
            }
            const auto* p = reinterpret_cast<const unsigned char*>(block.data());
            for (int r = 0; r < rows; ++r) {
                const int row = by * block_h + r;
                if (row >= height) {
                    break;
                }
                for (int c = 0; c < block_w; ++c) {
                    const int col = bx * block_w + c;
                    if (col >= width) {
                        break;
                    }
                    values[static_cast<std::size_t>(row) * width + col] = static_cast<float>(
                        read_sample(p + (static_cast<std::size_t>(r) * block_w + c) * nbytes, bits, format,
                                    reader.big_endian()));
                }
            }
        }
    }

    std::array<double, 6> gt{};
    if (const auto* m = numbers(kModelTransformation); m && m->size() >= 16) {
        gt = {(*m)[3], (*m)[0], (*m)[1], (*m)[7], (*m)[4], (*m)[5]};
    } else {
        const auto* scale = numbers(kModelPixelScale);
        const auto* tie = numbers(kModelTiepoint);
        require(scale && tie && scale->size() >= 2 && tie->size() >= 6, ErrorKind::Io,
                "GeoTIFF lacks georeferencing tags");
        gt = {(*tie)[3] - (*tie)[0] * (*scale)[0], (*scale)[0], 0.0, (*tie)[4] + (*tie)[1] * (*scale)[1], 0.0,
              -(*scale)[1]};
    }
    // GTRasterTypeGeoKey (1025) == 2 means tie points address pixel centers.
    if (const auto* keys = numbers(kGeoKeyDirectory); keys && keys->size() >= 4) {
        const auto n = static_cast<std::size_t>((*keys)[3]);
        for (std::size_t k = 0; k < n && 4 + 4 * k + 3 < keys->size(); ++k) {
            if ((*keys)[4 + 4 * k] == 1025 && (*keys)[4 + 4 * k + 1] == 0 && (*keys)[4 + 4 * k + 3] == 2) {
                gt[0] -= 0.5 * (gt[1] + gt[2]);
                gt[3] -= 0.5 * (gt[4] + gt[5]);
            }
        }
    }

    std::optional<double> nodata;
    if (auto it = ifd.find(kGdalNodata); it != ifd.end() && !trim(it->second.text).empty()) {
        nodata = std::stod(trim(it->second.text));
    }

    std::optional<double> resolution;
    if (auto it = ifd.find(kGdalMetadata); it != ifd.end()) {
        resolution = parse_metadata_resolution(it->second.text);
    }
    if (!resolution) {
        GeoTransform t(gt);
        const double lat = t.pixel_center(0.5 * (width - 1), 0.5 * (height - 1)).lat;
        const double dx = std::hypot(gt[1], gt[4]) * kMetersPerDegree * std::cos(lat * std::numbers::pi / 180.0);
        const double dy = std::hypot(gt[2], gt[5]) * kMetersPerDegree;
        resolution = std::sqrt(dx * dy);
    }
    return ElevationRaster(width, height, std::move(values), GeoTransform(gt), nodata, *resolution);
}

ElevationRaster read_geotiff(const std::filesystem::path& path) {
    return decode_geotiff(read_file(path));
}

namespace {

class Writer {
public:
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(std::string_view s) { out_.append(s); }
    std::size_t size() const { return out_.size(); }
    std::string take() { return std::move(out_); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) {
            out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        }
    }
    std::string out_;
};

struct OutEntry {
    std::uint16_t tag;
    std::uint16_t type;
    std::uint32_t count;
    std::string payload;  // little-endian encoded values
};

} // namespace

std::string encode_geotiff(const ElevationRaster& raster) {
    const auto& c = raster.transform().coefficients();
    require(c[2] == 0.0 && c[4] == 0.0, ErrorKind::Contract, "only north-up rasters can be written");
    const auto w = static_cast<std::uint32_t>(raster.width());
    const auto h = static_cast<std::uint32_t>(raster.height());
    const std::uint32_t pixel_bytes = w * h * 4;

    auto enc = [](auto fill) {
        Writer wr;
        fill(wr);
        return wr.take();
    };
    auto short_val = [&](std::uint16_t tag, std::uint16_t v) {
        return OutEntry{tag, 3, 1, enc([&](Writer& wr) { wr.u16(v); })};
    };
    auto long_val = [&](std::uint16_t tag, std::uint32_t v) {
        return OutEntry{tag, 4, 1, enc([&](Writer& wr) { wr.u32(v); })};
    };
    auto doubles = [&](std::uint16_t tag, std::vector<double> vs) {
        return OutEntry{tag, 12, static_cast<std::uint32_t>(vs.size()), enc([&](Writer& wr) {
                            for (double v : vs) wr.f64(v);
                        })};
    };
    auto ascii = [&](std::uint16_t tag, std::string s) {
        s.push_back('\0');
        return OutEntry{tag, 2, static_cast<std::uint32_t>(s.size()), s};
    };

    std::vector<std::uint16_t> geokeys = {1, 1, 0, 3, 1024, 0, 1, 2, 1025, 0, 1, 1, 2048, 0, 1, 4326};
    std::vector<OutEntry> entries = {
        long_val(kImageWidth, w),
        long_val(kImageLength, h),
        short_val(kBitsPerSample, 32),
        short_val(kCompression, 1),
        short_val(kPhotometric, 1),
        long_val(kStripOffsets, 0),  // patched below
        short_val(kSamplesPerPixel, 1),
        long_val(kRowsPerStrip, h),
        long_val(kStripByteCounts, pixel_bytes),
        short_val(kPlanarConfig, 1),
        short_val(kSampleFormat, 3),
        doubles(kModelPixelScale, {c[1], -c[5], 0.0}),
        doubles(kModelTiepoint, {0.0, 0.0, 0.0, c[0], c[3], 0.0}),
        OutEntry{kGeoKeyDirectory, 3, static_cast<std::uint32_t>(geokeys.size()), enc([&](Writer& wr) {
                     for (auto k : geokeys) wr.u16(k);
                 })},
        ascii(kGdalMetadata, "<GDALMetadata><Item name=\"SOURCE_RESOLUTION\">" +
                                 format_double(raster.source_resolution()) + "</Item></GDALMetadata>"),
    };
    if (raster.nodata()) {
        entries.push_back(ascii(kGdalNodata, format_double(*raster.nodata())));
    }

    const std::uint32_t ifd_offset = 8;
    const std::uint32_t ifd_size = 2 + 12 * static_cast<std::uint32_t>(entries.size()) + 4;
    std::uint32_t extra = ifd_offset + ifd_size;
    std::vector<std::uint32_t> extra_offsets(entries.size(), 0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].payload.size() > 4) {
            extra_offsets[i] = extra;
            extra += static_cast<std::uint32_t>(entries[i].payload.size());
            extra += extra % 2;
        }
    }
    const std::uint32_t pixel_offset = extra;
    for (auto& e : entries) {
        if (e.tag == kStripOffsets) {
            e.payload = enc([&](Writer& wr) { wr.u32(pixel_offset); });
        }
    }

    Writer out;
    out.bytes("II");
    out.u16(42);
    out.u32(ifd_offset);
    out.u16(static_cast<std::uint16_t>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        out.u16(e.tag);
        out.u16(e.type);
        out.u32(e.count);
        if (e.payload.size() > 4) {
            out.u32(extra_offsets[i]);
        } else {
            std::string inline_value = e.payload;
            inline_value.resize(4, '\0');
            out.bytes(inline_value);
        }
    }
    out.u32(0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].payload.size() > 4) {
            out.bytes(entries[i].payload);
            if (entries[i].payload.size() % 2) {
                out.bytes(std::string(1, '\0'));
            }
        }
    }
    for (float v : raster.values()) {
        out.u32(std::bit_cast<std::uint32_t>(v));
    }
    return out.take();
}

void write_geotiff(const std::filesystem::path& path, const ElevationRaster& raster) {
    write_file_atomic(path, encode_geotiff(raster));
}

} // namespace topoembed
