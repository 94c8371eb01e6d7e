#include "vterr/io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <regex>

namespace vterr::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct MemReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto *err = static_cast<std::string *>(png_get_error_ptr(png));
  if (err)
    *err = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void mem_read(png_structp png, png_bytep out, png_size_t n) {
  auto *r = static_cast<MemReader *>(png_get_io_ptr(png));
  if (r->pos + n > r->bytes.size())
    png_error(png, "truncated PNG stream");
  std::memcpy(out, r->bytes.data() + r->pos, n);
  r->pos += n;
}

void mem_write(png_structp png, png_bytep data, png_size_t n) {
  auto *out = static_cast<std::vector<std::uint8_t> *>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void mem_flush(png_structp) {}

// Rows are handed to libpng already in PNG byte order.
std::vector<std::uint8_t> encode(int width, int height, int bit_depth,
                                 int color_type,
                                 const std::vector<std::uint8_t> &raw,
                                 std::size_t row_bytes) {
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err,
                                            png_error_fn, png_warning_fn);
  if (!png)
    throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode failed: " + err);
  }
  png_set_write_fn(png, &out, mem_write, mem_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 3);
  for (int y = 0; y < height; ++y)
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(raw.data()) + static_cast<std::size_t>(y) * row_bytes;
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

struct Decoded {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<std::uint8_t> raw;
  std::size_t row_bytes = 0;
};

Decoded decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw IoError("not a PNG file");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err,
                                           png_error_fn, png_warning_fn);
  if (!png)
    throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  MemReader reader{bytes, 0};
  Decoded d;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("PNG decode failed: " + err);
  }
  png_set_read_fn(png, &reader, mem_read);
  png_read_info(png, info);
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  d.bit_depth = png_get_bit_depth(png, info);
  d.color_type = png_get_color_type(png, info);
  if (d.color_type == PNG_COLOR_TYPE_GRAY && d.bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    d.bit_depth = 8;
  }
  png_read_update_info(png, info);
  d.row_bytes = png_get_rowbytes(png, info);
  d.raw.resize(d.row_bytes * static_cast<std::size_t>(d.height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(d.height));
  for (int y = 0; y < d.height; ++y)
    rows[static_cast<std::size_t>(y)] =
        d.raw.data() + static_cast<std::size_t>(y) * d.row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return d;
}

std::string lower_name(const fs::path &p) { return p.filename().string(); }

} // namespace

std::vector<std::uint8_t> encode_png16(const Image16 &img) {
  const std::size_t row_bytes = static_cast<std::size_t>(img.width()) * 2;
  std::vector<std::uint8_t> raw(row_bytes * static_cast<std::size_t>(img.height()));
  std::size_t k = 0;
  for (std::uint16_t v : img.pixels()) {
    raw[k++] = static_cast<std::uint8_t>(v >> 8);
    raw[k++] = static_cast<std::uint8_t>(v & 0xFF);
  }
  return encode(img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY, raw,
                row_bytes);
}

std::vector<std::uint8_t> encode_png8(const Grid<std::uint8_t> &img) {
  std::vector<std::uint8_t> raw(img.pixels().begin(), img.pixels().end());
  return encode(img.width(), img.height(), 8, PNG_COLOR_TYPE_GRAY, raw,
                static_cast<std::size_t>(img.width()));
}

std::vector<std::uint8_t> encode_png_rgb(const Grid<Rgb> &img) {
  std::vector<std::uint8_t> raw;
  raw.reserve(img.size() * 3);
  for (const Rgb &p : img.pixels())
    raw.insert(raw.end(), p.begin(), p.end());
  return encode(img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, raw,
                static_cast<std::size_t>(img.width()) * 3);
}

Image16 decode_png_gray16(std::span<const std::uint8_t> bytes) {
  const Decoded d = decode(bytes);
  if (d.color_type != PNG_COLOR_TYPE_GRAY)
    throw IoError("expected a single-channel grayscale PNG");
  Image16 img(d.width, d.height);
  for (int y = 0; y < d.height; ++y) {
    const std::uint8_t *row = d.raw.data() + static_cast<std::size_t>(y) * d.row_bytes;
    auto out = img.row(y);
    for (int x = 0; x < d.width; ++x)
      out[static_cast<std::size_t>(x)] =
          d.bit_depth == 16
              ? static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1])
              : row[x];
  }
  return img;
}

Grid<std::uint8_t> decode_png_gray8(std::span<const std::uint8_t> bytes) {
  const Decoded d = decode(bytes);
  if (d.color_type != PNG_COLOR_TYPE_GRAY || d.bit_depth != 8)
    throw IoError("expected an 8-bit single-channel PNG");
  Grid<std::uint8_t> img(d.width, d.height);
  for (int y = 0; y < d.height; ++y)
    std::memcpy(img.row(y).data(),
                d.raw.data() + static_cast<std::size_t>(y) * d.row_bytes,
                static_cast<std::size_t>(d.width));
  return img;
}

std::vector<std::uint8_t> read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path &path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw IoError("short write to " + path.string());
}

Image16 read_png16(const fs::path &path) {
  try {
    return decode_png_gray16(read_file(path));
  } catch (const IoError &e) {
    throw IoError(path.filename().string() + ": " + e.what());
  }
}

void write_png16(const fs::path &path, const Image16 &img) {
  write_file(path, encode_png16(img));
}

Grid<std::uint8_t> read_png8(const fs::path &path) {
  try {
    return decode_png_gray8(read_file(path));
  } catch (const IoError &e) {
    throw IoError(path.filename().string() + ": " + e.what());
  }
}

void write_png8(const fs::path &path, const Grid<std::uint8_t> &img) {
  write_file(path, encode_png8(img));
}

DsaSequence load_sequence(const fs::path &dir) {
  if (!fs::is_directory(dir))
    throw IoError("not a directory: " + dir.string());

  static const std::regex frame_re(R"(frame_(\d{4,})\.png)");
  std::map<int, fs::path> frames;
  for (const auto &entry : fs::directory_iterator(dir)) {
    const std::string name = lower_name(entry.path());
    std::smatch m;
    if (entry.is_regular_file() && std::regex_match(name, m, frame_re)) {
      const int idx = std::stoi(m[1].str());
      if (!frames.emplace(idx, entry.path()).second)
        throw IoError("duplicate frame index in " + name);
    }
  }
  if (frames.empty())
    throw IoError("no frames found in " + dir.string());

  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path))
    throw IoError("missing sidecar meta.json in " + dir.string());

  DsaSequence seq;
  int expected = 0;
  for (const auto &[idx, path] : frames) {
    if (idx != expected) {
      char want[32];
      std::snprintf(want, sizeof want, "frame_%04d.png", expected);
      throw IoError("frame index gap: expected " + std::string(want) +
                    " but found " + path.filename().string());
    }
    Image16 img = read_png16(path);
    if (!seq.frames.empty() && img.shape() != seq.frames.front().shape())
      throw IoError("inconsistent frame shape in " + path.filename().string() +
                    ": " + to_string(img.shape()) + " vs " +
                    to_string(seq.frames.front().shape()));
    seq.frames.push_back(std::move(img));
    ++expected;
  }

  json meta;
  try {
    std::ifstream in(meta_path);
    meta = json::parse(in);
    seq.view = parse_view(meta.at("view").get<std::string>());
    seq.stage = parse_stage(meta.at("stage").get<std::string>());
    seq.occlusion = parse_occlusion(meta.at("occlusion").get<std::string>());
    seq.patient_id = meta.at("patient_id").get<std::string>();
    if (meta.contains("phase_labels") && !meta["phase_labels"].is_null()) {
      std::vector<Phase> labels;
      for (const auto &v : meta["phase_labels"])
        labels.push_back(parse_phase(v.get<std::string>()));
      seq.phase_labels = std::move(labels);
    }
  } catch (const json::exception &e) {
    throw IoError("meta.json: " + std::string(e.what()));
  } catch (const IoError &) {
    throw;
  } catch (const Error &e) {
    throw IoError("meta.json: " + std::string(e.what()));
  }
  if (seq.phase_labels && seq.phase_labels->size() != seq.frames.size())
    throw IoError("meta.json: phase label count mismatch (" +
                  std::to_string(seq.phase_labels->size()) + " labels, " +
                  std::to_string(seq.frames.size()) + " frames)");
  return seq;
}

void save_sequence(const DsaSequence &seq, const fs::path &dir) {
  seq.validate();
  fs::create_directories(dir);
  for (int t = 0; t < seq.frame_count(); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04d.png", t);
    write_png16(dir / name, seq.frames[static_cast<std::size_t>(t)]);
  }
  json meta = {{"view", to_string(seq.view)},
               {"stage", to_string(seq.stage)},
               {"occlusion", to_string(seq.occlusion)},
               {"patient_id", seq.patient_id}};
  if (seq.phase_labels) {
    json labels = json::array();
    for (Phase p : *seq.phase_labels)
      labels.push_back(to_string(p));
    meta["phase_labels"] = labels;
  }
  std::ofstream out(dir / "meta.json");
  out << meta.dump(2) << "\n";
}

TerritoryMask load_mask(const fs::path &path) {
  Grid<std::uint8_t> raw = read_png8(path);
  try {
    return TerritoryMask(std::move(raw));
  } catch (const Error &e) {
    throw IoError(path.filename().string() + ": " + e.what());
  }
}

void save_mask(const TerritoryMask &mask, const fs::path &path) {
  write_png8(path, mask.labels());
}

BinaryMask load_binary_mask(const fs::path &path) {
  return BinaryMask(read_png8(path));
}

void save_binary_mask(const BinaryMask &mask, const fs::path &path) {
  write_png8(path, mask);
}

} // namespace vterr::io
