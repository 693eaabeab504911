#include "supercam/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "supercam/supercam.hpp"

namespace supercam::io {
namespace {

struct RawRaster {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::uint32_t maxval = 0;
  std::vector<std::uint32_t> samples;
};

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

RawRaster parse_pnm_raw(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  const auto fail = [&](const std::string& what) -> FormatError { return FormatError(what, pos); };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("not a binary PGM/PPM (expected P5 or P6)", 0);
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  pos = 2;
  const auto next_number = [&]() -> std::uint64_t {
    while (pos < bytes.size()) {
      if (is_space(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size()) throw fail("PNM header truncated");
    if (bytes[pos] < '0' || bytes[pos] > '9') throw fail("malformed PNM header");
    std::uint64_t v = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos] - '0');
      if (v > (1u << 30)) throw fail("PNM header value out of range");
      ++pos;
    }
    return v;
  };
  RawRaster r;
  r.width = static_cast<int>(next_number());
  r.height = static_cast<int>(next_number());
  r.maxval = static_cast<std::uint32_t>(next_number());
  r.channels = channels;
  if (r.width < 1 || r.height < 1) throw fail("PNM dimensions must be >= 1");
  if (r.maxval < 1 || r.maxval > 65535) throw fail("PNM maxval must lie in [1, 65535]");
  if (pos >= bytes.size() || !is_space(bytes[pos])) throw fail("PNM header truncated");
  ++pos;

  const std::size_t bytes_per_sample = r.maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(r.width) * r.height * channels;
  const std::size_t need = count * bytes_per_sample;
  if (bytes.size() - pos < need) {
    throw FormatError("PNM pixel data truncated: need " + std::to_string(need) + " bytes, have " +
                          std::to_string(bytes.size() - pos),
                      bytes.size());
  }
  r.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t v = bytes[pos + i * bytes_per_sample];
    if (bytes_per_sample == 2) v = (v << 8) | bytes[pos + i * 2 + 1];
    if (v > r.maxval) throw FormatError("PNM sample exceeds maxval", pos + i * bytes_per_sample);
    r.samples[i] = v;
  }
  return r;
}

struct PngSource {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

void png_read_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
  if (src->pos + length > src->bytes->size()) png_error(png, "PNG data truncated");
  std::memcpy(out, src->bytes->data() + src->pos, length);
  src->pos += length;
}

RawRaster parse_png_raw(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw FormatError("not a PNG file", 0);
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  PngSource src{&bytes, 0};
  RawRaster r;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> data;
  if (setjmp(png_jmpbuf(png))) {
    const std::size_t at = src.pos;
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG", at);
  }
  png_set_read_fn(png, &src, png_read_memory);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  r.width = static_cast<int>(png_get_image_width(png, info));
  r.height = static_cast<int>(png_get_image_height(png, info));
  r.channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  r.maxval = out_depth == 16 ? 65535u : 255u;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  data.resize(rowbytes * static_cast<std::size_t>(r.height));
  rows.resize(static_cast<std::size_t>(r.height));
  for (int y = 0; y < r.height; ++y) rows[static_cast<std::size_t>(y)] = data.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (r.channels != 1 && r.channels != 3) throw FormatError("unsupported PNG channel layout", 0);
  const std::size_t count = static_cast<std::size_t>(r.width) * r.height * r.channels;
  r.samples.resize(count);
  for (int y = 0; y < r.height; ++y) {
    const std::uint8_t* row = rows[static_cast<std::size_t>(y)];
    for (std::size_t i = 0; i < static_cast<std::size_t>(r.width) * r.channels; ++i) {
      const std::size_t dst = static_cast<std::size_t>(y) * r.width * r.channels + i;
      r.samples[dst] = out_depth == 16 ? (static_cast<std::uint32_t>(row[2 * i]) << 8) | row[2 * i + 1]
                                       : row[i];
    }
  }
  return r;
}

bool has_png_signature(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

RawRaster parse_raster(const std::vector<std::uint8_t>& bytes) {
  if (has_png_signature(bytes)) return parse_png_raw(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') return parse_pnm_raw(bytes);
  throw FormatError("unsupported image format (expected PNG, PGM or PPM)", 0);
}

IntensityImage to_intensity(const RawRaster& r) {
  IntensityImage img(r.width, r.height, r.channels);
  auto values = img.values();
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    values[i] = static_cast<double>(r.samples[i]) / static_cast<double>(r.maxval);
  }
  return img;
}

LabelMap compact_ids(int width, int height, std::vector<std::int64_t> raw,
                     const LabelLoadOptions& options) {
  std::vector<std::int32_t> ids(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (options.zero_is_void && raw[i] == 0) {
      ids[i] = LabelMap::kVoidLabel;
    } else {
      if (raw[i] < 0 || raw[i] > 0x7FFFFFFF) throw FormatError("label id out of range", i);
      ids[i] = static_cast<std::int32_t>(raw[i]);
    }
  }
  LabelMap labels(width, height, std::move(ids));
  labels.compact();
  return labels;
}

void write_file(const std::filesystem::path& path, const std::string& header,
                const std::vector<std::uint8_t>& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string lower_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

IntensityImage parse_pnm(const std::vector<std::uint8_t>& bytes) {
  return to_intensity(parse_pnm_raw(bytes));
}

IntensityImage load_image(const std::filesystem::path& path) {
  return to_intensity(parse_raster(read_file(path)));
}

void save_pnm(const IntensityImage& image, const std::filesystem::path& path) {
  const std::string header = std::string(image.channels() == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(image.width()) + " " + std::to_string(image.height()) +
                             "\n255\n";
  std::vector<std::uint8_t> payload(image.values().size());
  std::transform(image.values().begin(), image.values().end(), payload.begin(), quantize_unit);
  write_file(path, header, payload);
}

void save_png(const IntensityImage& image, const std::filesystem::path& path) {
  png_image out;
  std::memset(&out, 0, sizeof(out));
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(image.width());
  out.height = static_cast<png_uint_32>(image.height());
  out.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> payload(image.values().size());
  std::transform(image.values().begin(), image.values().end(), payload.begin(), quantize_unit);
  if (!png_image_write_to_file(&out, path.string().c_str(), 0, payload.data(), 0, nullptr)) {
    throw std::runtime_error("failed writing PNG " + path.string() + ": " + out.message);
  }
}

void save_image(const IntensityImage& image, const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  if (ext == ".png") {
    save_png(image, path);
  } else if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    save_pnm(image, path);
  } else {
    throw ConfigError("unsupported output image extension '" + ext + "'");
  }
}

LabelMap parse_label_csv(const std::string& text, const LabelLoadOptions& options) {
  std::vector<std::vector<std::int64_t>> rows;
  std::vector<std::int64_t> current;
  std::string token;
  std::size_t offset = 0;
  const auto flush_token = [&]() {
    const auto first = token.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      token.clear();
      return false;
    }
    const auto last = token.find_last_not_of(" \t\r");
    const std::string t = token.substr(first, last - first + 1);
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(t, &used);
    } catch (const std::exception&) {
      throw FormatError("invalid label id '" + t + "'", offset);
    }
    if (used != t.size()) throw FormatError("invalid label id '" + t + "'", offset);
    current.push_back(v);
    token.clear();
    return true;
  };
  const auto flush_row = [&]() {
    if (!current.empty()) rows.push_back(std::move(current));
    current.clear();
  };
  for (; offset < text.size(); ++offset) {
    const char c = text[offset];
    if (c == ',') {
      if (!flush_token()) throw FormatError("empty label field", offset);
    } else if (c == ';' || c == '\n') {
      flush_token();
      flush_row();
    } else {
      token.push_back(c);
    }
  }
  flush_token();
  flush_row();
  if (rows.empty()) throw FormatError("label CSV is empty", 0);
  const std::size_t width = rows.front().size();
  std::vector<std::int64_t> raw;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw FormatError("label CSV row " + std::to_string(r) + " has " +
                            std::to_string(rows[r].size()) + " ids, expected " + std::to_string(width),
                        0);
    }
    raw.insert(raw.end(), rows[r].begin(), rows[r].end());
  }
  return compact_ids(static_cast<int>(width), static_cast<int>(rows.size()), std::move(raw), options);
}

LabelMap load_labels(const std::filesystem::path& path, const LabelLoadOptions& options) {
  const auto bytes = read_file(path);
  if (lower_extension(path) == ".csv") {
    return parse_label_csv(std::string(bytes.begin(), bytes.end()), options);
  }
  const RawRaster r = parse_raster(bytes);
  if (r.channels != 1) throw FormatError("label image must be single-channel", 0);
  std::vector<std::int64_t> raw(r.samples.begin(), r.samples.end());
  return compact_ids(r.width, r.height, std::move(raw), options);
}

void save_labels_pgm(const LabelMap& labels, const std::filesystem::path& path, bool void_as_zero) {
  const std::string header = "P5\n" + std::to_string(labels.width()) + " " +
                             std::to_string(labels.height()) + "\n65535\n";
  std::vector<std::uint8_t> payload;
  payload.reserve(labels.pixel_count() * 2);
  for (auto id : labels.ids()) {
    const std::int64_t v = void_as_zero ? static_cast<std::int64_t>(id) + 1 : id;
    if (v < 0 || v > 65535) throw ConfigError("label id does not fit a 16-bit PGM");
    payload.push_back(static_cast<std::uint8_t>(v >> 8));
    payload.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  write_file(path, header, payload);
}

}  // namespace supercam::io
