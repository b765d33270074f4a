#include "camcal/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

namespace camcal {
namespace {

namespace fs = std::filesystem;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

int quantize(double s, int maxval) {
  return static_cast<int>(std::lround(clamp01(s) * maxval));
}

// ---------------------------------------------------------------- PNG read

Image load_png(const std::string& path, AlphaPolicy alpha) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error("cannot open '" + path + "' for reading");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng: out of memory");
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<png_byte> data;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("failed to decode PNG '" + path + "'");
  }

  png_init_io(png, f.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);

  // Alpha handling must be queued before the single png_read_update_info
  // call; libpng rejects a second one.
  const bool has_trns = png_get_valid(png, info, PNG_INFO_tRNS) != 0;
  const bool has_alpha = (color_type & PNG_COLOR_MASK_ALPHA) != 0 || has_trns;
  if (has_alpha) {
    if (alpha == AlphaPolicy::Reject) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw Error("'" + path + "' has an alpha channel; pass the strip-alpha option to drop it");
    }
    if (has_trns) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
  }

  png_read_update_info(png, info);
  bit_depth = png_get_bit_depth(png, info);
  color_type = png_get_color_type(png, info);
  int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("'" + path + "': unsupported channel layout (" + std::to_string(channels) +
                " channels)");
  }

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  data.resize(rowbytes * height);
  row_ptrs.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) row_ptrs[y] = data.data() + y * rowbytes;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(width), static_cast<int>(height), channels, 0.0,
            bit_depth == 16 ? 16 : 8);
  const std::size_t count = img.sample_count();
  if (bit_depth == 16) {
    // PNG stores 16-bit samples big-endian
    for (std::size_t i = 0; i < count; ++i) {
      const unsigned v = (static_cast<unsigned>(data[2 * i]) << 8) | data[2 * i + 1];
      img.samples[i] = v / 65535.0;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) img.samples[i] = data[i] / 255.0;
  }
  return img;
}

// --------------------------------------------------------------- PNG write

void save_png(const Image& img, const std::string& path, int bit_depth) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error("cannot open '" + path + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed to encode PNG '" + path + "'");
  }

  png_init_io(png, f.get());
  const int color_type = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, img.width, img.height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const int maxval = (1 << bit_depth) - 1;
  const std::size_t row_samples = static_cast<std::size_t>(img.width) * img.channels;
  if (bit_depth == 16) {
    std::vector<png_byte> row(row_samples * 2);
    for (int y = 0; y < img.height; ++y) {
      for (std::size_t i = 0; i < row_samples; ++i) {
        const int v = quantize(img.samples[y * row_samples + i], maxval);
        row[2 * i] = static_cast<png_byte>(v >> 8);
        row[2 * i + 1] = static_cast<png_byte>(v & 0xff);
      }
      png_write_row(png, row.data());
    }
  } else {
    std::vector<png_byte> row(row_samples);
    for (int y = 0; y < img.height; ++y) {
      for (std::size_t i = 0; i < row_samples; ++i) {
        row[i] = static_cast<png_byte>(quantize(img.samples[y * row_samples + i], maxval));
      }
      png_write_row(png, row.data());
    }
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ----------------------------------------------------------------- PNM I/O

int pnm_token(std::istream& in) {
  // skips whitespace and '#' comments
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  return value;
}

Image load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw Error("'" + path + "': not a binary PGM/PPM file");
  }
  const int channels = magic[1] == '6' ? 3 : 1;
  const int width = pnm_token(in);
  const int height = pnm_token(in);
  const int maxval = pnm_token(in);
  if (width <= 0 || height <= 0 || (maxval != 255 && maxval != 65535)) {
    throw Error("'" + path + "': unsupported PNM header");
  }
  in.get();  // single whitespace after maxval

  Image img(width, height, channels, 0.0, maxval == 65535 ? 16 : 8);
  const std::size_t count = img.sample_count();
  if (maxval == 65535) {
    std::vector<unsigned char> raw(count * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw Error("'" + path + "': truncated PNM payload");
    for (std::size_t i = 0; i < count; ++i) {
      img.samples[i] = ((raw[2 * i] << 8) | raw[2 * i + 1]) / 65535.0;
    }
  } else {
    std::vector<unsigned char> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw Error("'" + path + "': truncated PNM payload");
    for (std::size_t i = 0; i < count; ++i) img.samples[i] = raw[i] / 255.0;
  }
  return img;
}

void save_pnm(const Image& img, const std::string& path, int bit_depth) {
  const std::string ext = lower_ext(path);
  if (ext == ".ppm" && img.channels != 3) {
    throw Error("PPM stores RGB; image has " + std::to_string(img.channels) + " channel(s)");
  }
  if (ext == ".pgm" && img.channels != 1) {
    throw Error("PGM stores grayscale; image has " + std::to_string(img.channels) +
                " channel(s)");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  const int maxval = (1 << bit_depth) - 1;
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n"
      << maxval << "\n";
  const std::size_t count = img.sample_count();
  if (bit_depth == 16) {
    std::vector<unsigned char> raw(count * 2);
    for (std::size_t i = 0; i < count; ++i) {
      const int v = quantize(img.samples[i], maxval);
      raw[2 * i] = static_cast<unsigned char>(v >> 8);  // big-endian per Netpbm
      raw[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  } else {
    std::vector<unsigned char> raw(count);
    for (std::size_t i = 0; i < count; ++i) {
      raw[i] = static_cast<unsigned char>(quantize(img.samples[i], maxval));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  }
  if (!out) throw Error("failed writing '" + path + "'");
}

bool is_png_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {0};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in && png_sig_cmp(sig, 0, 8) == 0;
}

}  // namespace

Image load_image(const std::string& path, AlphaPolicy alpha) {
  if (!fs::exists(path)) throw Error("no such file: '" + path + "'");
  if (is_png_file(path)) return load_png(path, alpha);
  const std::string ext = lower_ext(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return load_pnm(path);
  throw Error("'" + path + "': unsupported format (PNG, PPM, PGM are supported)");
}

void save_image(const Image& img, const std::string& path, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw Error("bit depth must be 8 or 16, got " + std::to_string(bit_depth));
  }
  if (img.width <= 0 || img.height <= 0 || (img.channels != 1 && img.channels != 3)) {
    throw Error("cannot save empty or non gray/RGB image");
  }
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    save_png(img, path, bit_depth);
  } else if (ext == ".ppm" || ext == ".pgm") {
    save_pnm(img, path, bit_depth);
  } else {
    throw Error("'" + path + "': unsupported output extension (.png, .ppm, .pgm)");
  }
}

LoadedStack load_stack_dir(const std::string& dir, AlphaPolicy alpha) {
  if (!fs::is_directory(dir)) throw Error("no such directory: '" + dir + "'");
  std::vector<std::string> cams, cals;
  std::optional<std::string> truth_path;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    const std::string ext = lower_ext(name);
    if (ext != ".png" && ext != ".ppm" && ext != ".pgm") continue;
    if (name.rfind("truth.", 0) == 0) {
      truth_path = entry.path().string();
    } else if (name.rfind("cam", 0) == 0) {
      cams.push_back(entry.path().string());
    } else if (name.rfind("cal", 0) == 0) {
      cals.push_back(entry.path().string());
    }
  }
  // A calibrated output directory (cal*.png) is itself a loadable stack.
  if (cams.empty()) cams = std::move(cals);
  std::sort(cams.begin(), cams.end());
  if (cams.empty()) {
    throw Error("'" + dir + "' contains no cam* or cal* .{png,ppm,pgm} images");
  }

  LoadedStack out;
  out.camera_paths = cams;
  out.stack.scene_id = fs::path(dir).filename().string();
  for (const std::string& p : cams) out.stack.images.push_back(load_image(p, alpha));
  if (truth_path) out.truth = load_image(*truth_path, alpha);
  return out;
}

}  // namespace camcal
