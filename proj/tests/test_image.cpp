#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <string>
#include <vector>

#include "camcal/error.hpp"
#include "camcal/image.hpp"
#include "camcal/image_io.hpp"
#include "camcal/rng.hpp"
#include "camcal/serial_ref.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace camcal;
using namespace testutil;

namespace {

void write_rgba_png(const std::string& path, int w, int h) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  REQUIRE(f != nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  REQUIRE(png != nullptr);
  png_infop info = png_create_info_struct(png);
  REQUIRE(info != nullptr);
  REQUIRE(setjmp(png_jmpbuf(png)) == 0);
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB_ALPHA, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(w) * 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[x * 4 + 0] = static_cast<png_byte>(10 + x + y);
      row[x * 4 + 1] = static_cast<png_byte>(40 + 2 * x);
      row[x * 4 + 2] = static_cast<png_byte>(90 + 3 * y);
      row[x * 4 + 3] = 128;
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

}  // namespace

TEST_CASE("clamp01 pins samples to the unit interval") {
  CHECK(clamp01(-0.5) == 0.0);
  CHECK(clamp01(0.0) == 0.0);
  CHECK(clamp01(0.25) == 0.25);
  CHECK(clamp01(1.0) == 1.0);
  CHECK(clamp01(2.0) == 1.0);
}

TEST_CASE("intensity_bin maps the unit interval onto 256 byte bins") {
  CHECK(intensity_bin(0.0) == 0);
  CHECK(intensity_bin(1.0) == 255);
  CHECK(intensity_bin(0.5) == 127);  // 127.5 truncates down
  CHECK(intensity_bin(-3.0) == 0);
  CHECK(intensity_bin(4.0) == 255);
  CHECK(intensity_bin(254.7 / 255.0) == 254);
  for (int k = 0; k < 255; ++k) {
    CHECK(intensity_bin((k + 0.5) / 255.0) == k);  // bin midpoints re-bin to k
  }
}

TEST_CASE("Image construction, indexing and clamp") {
  Image img(4, 3, 3, 0.25);
  CHECK(img.pixel_count() == 12);
  CHECK(img.sample_count() == 36);
  CHECK(img.at(2, 1, 0) == 0.25);
  img.at(3, 2, 2) = 7.0;
  img.at(0, 0, 1) = -1.0;
  img.clamp();
  CHECK(img.at(3, 2, 2) == 1.0);
  CHECK(img.at(0, 0, 1) == 0.0);

  Image gray(4, 3, 1);
  CHECK_FALSE(img.same_shape(gray));
  CHECK(img.same_shape(Image(4, 3, 3, 0.9)));
}

TEST_CASE("histogram puts a constant image into one bin per channel") {
  Image img(5, 4, 3, 0.5);
  Histogram h = histogram(img);
  CHECK(h.channels == 3);
  CHECK(h.total == 20);
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < kHistogramBins; ++k) {
      CHECK(h.at(c, k) == (k == 127 ? 20u : 0u));
    }
  }
}

TEST_CASE("histogram conserves mass and matches the serial kernel") {
  Rng rng(41);
  for (int wide : {0, 1}) {
    // 8x8 stays serial, 130x130x3 crosses the parallel cutoff
    const int dim = wide ? 130 : 8;
    Image img = random_image(rng, dim, dim, 3);
    img.samples[5] = 0.0;
    img.samples[7] = 1.0;
    Histogram h = histogram(img);
    Histogram ref = serial::histogram(img);
    CHECK(h.channels == ref.channels);
    CHECK(h.bins == ref.bins);
    for (int c = 0; c < 3; ++c) {
      std::uint64_t sum = 0;
      for (int k = 0; k < kHistogramBins; ++k) sum += h.at(c, k);
      CHECK(sum == img.pixel_count());
    }
  }
}

TEST_CASE("validate_stack accepts a well-formed stack") {
  ImageStack st;
  st.scene_id = "big";
  for (int i = 0; i < 9; ++i) st.images.emplace_back(512, 512, 3);
  CHECK_NOTHROW(validate_stack(st));
}

TEST_CASE("validate_stack names the offending image") {
  ImageStack solo;
  solo.scene_id = "solo";
  solo.images.emplace_back(4, 4, 3);
  CHECK_THROWS_WITH_AS(validate_stack(solo), "stack 'solo' has 1 image(s); a stack needs at least 2",
                       Error);

  ImageStack empty;
  empty.scene_id = "empty";
  CHECK_THROWS_WITH_AS(validate_stack(empty), "stack 'empty' has 0 image(s); a stack needs at least 2",
                       Error);

  ImageStack sized;
  sized.images.emplace_back(10, 10, 3);
  sized.images.emplace_back(11, 10, 3);
  CHECK_THROWS_WITH_AS(validate_stack(sized), "image 1: size 11x10 does not match image 0 (10x10)",
                       Error);

  ImageStack chans;
  chans.images.emplace_back(10, 10, 3);
  chans.images.emplace_back(10, 10, 3);
  chans.images.emplace_back(10, 10, 1);
  CHECK_THROWS_WITH_AS(validate_stack(chans), "image 2: 1 channel(s) does not match image 0 (3)",
                       Error);
}

TEST_CASE("PGM bytes quantize round-half-up") {
  TempDir dir("pgm");
  Image img(2, 1, 1);
  img.samples = {1.0, 0.5};
  save_image(img, dir.file("g.pgm"));
  const std::string raw = slurp(dir.file("g.pgm"));
  std::string expect = "P5\n2 1\n255\n";
  expect.push_back(static_cast<char>(0xff));
  expect.push_back(static_cast<char>(0x80));  // 127.5 rounds up
  CHECK(raw == expect);
}

TEST_CASE("16-bit PGM payload decodes big-endian") {
  TempDir dir("pgm16");
  {
    std::ofstream out(dir.file("w.pgm"), std::ios::binary);
    out << "P5\n1 1\n65535\n";
    out.put(static_cast<char>(0x80));
    out.put(static_cast<char>(0x00));
  }
  Image img = load_image(dir.file("w.pgm"));
  CHECK(img.width == 1);
  CHECK(img.channels == 1);
  CHECK(img.source_bit_depth == 16);
  CHECK(img.samples[0] == 32768.0 / 65535.0);
}

TEST_CASE("PNM round trip is exact on quantized samples and deterministic") {
  TempDir dir("pnm");
  Rng rng(7);
  Image img = quantize8(random_image(rng, 9, 7, 3));
  save_image(img, dir.file("a.ppm"));
  Image back = load_image(dir.file("a.ppm"));
  CHECK(bits_equal(img, back));
  save_image(back, dir.file("b.ppm"));
  CHECK(slurp(dir.file("a.ppm")) == slurp(dir.file("b.ppm")));
}

TEST_CASE("8-bit round trip error stays within half a level") {
  TempDir dir("round8");
  Rng rng(8);
  Image img = random_image(rng, 12, 10, 3);
  save_image(img, dir.file("x.ppm"));
  CHECK(max_abs_diff(img, load_image(dir.file("x.ppm"))) <= 0.5 / 255.0 + 1e-12);
  save_image(img, dir.file("x.png"));
  CHECK(max_abs_diff(img, load_image(dir.file("x.png"))) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("PNG round trips exactly on quantized samples, gray and RGB") {
  TempDir dir("png8");
  Rng rng(9);
  Image rgb = quantize8(random_image(rng, 6, 5, 3));
  save_image(rgb, dir.file("rgb.png"));
  CHECK(bits_equal(rgb, load_image(dir.file("rgb.png"))));

  Image gray = quantize8(random_image(rng, 6, 5, 1));
  save_image(gray, dir.file("gray.png"));
  Image back = load_image(dir.file("gray.png"));
  CHECK(back.channels == 1);
  CHECK(bits_equal(gray, back));
}

TEST_CASE("16-bit PNG round trips and keeps its source depth") {
  TempDir dir("png16");
  Rng rng(10);
  Image img = random_image(rng, 6, 5, 3);
  for (double& s : img.samples) {
    s = static_cast<double>(std::lround(s * 65535.0)) / 65535.0;
  }
  save_image(img, dir.file("deep.png"), 16);
  Image back = load_image(dir.file("deep.png"));
  CHECK(back.source_bit_depth == 16);
  CHECK(bits_equal(img, back));
}

TEST_CASE("alpha channels are rejected unless stripped") {
  TempDir dir("alpha");
  write_rgba_png(dir.file("a.png"), 4, 3);
  const std::string msg =
      "'" + dir.file("a.png") + "' has an alpha channel; pass the strip-alpha option to drop it";
  CHECK_THROWS_WITH_AS(load_image(dir.file("a.png")), msg.c_str(), Error);

  Image img = load_image(dir.file("a.png"), AlphaPolicy::Strip);
  CHECK(img.channels == 3);
  CHECK(img.width == 4);
  CHECK(img.at(2, 1, 0) == (10 + 2 + 1) / 255.0);
  CHECK(img.at(2, 1, 1) == (40 + 4) / 255.0);
  CHECK(img.at(2, 1, 2) == (90 + 3) / 255.0);
}

TEST_CASE("load_stack_dir sorts cameras, picks up truth, ignores strangers") {
  TempDir dir("stack");
  for (int k : {2, 0, 1}) {
    Image img(3, 3, 3, k / 255.0);
    char name[16];
    std::snprintf(name, sizeof name, "cam%02d.%s", k, k == 1 ? "ppm" : "png");
    save_image(img, dir.file(name));
  }
  save_image(Image(3, 3, 3, 0.5), dir.file("truth.png"));
  save_image(Image(3, 3, 3, 0.9), dir.file("extra.png"));  // not cam*/truth.*
  {
    std::ofstream(dir.file("notes.txt")) << "ignore me";
  }

  LoadedStack loaded = load_stack_dir(dir.str());
  CHECK(loaded.stack.count() == 3);
  CHECK(loaded.stack.scene_id == dir.path.filename().string());
  CHECK(loaded.camera_paths.size() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(loaded.stack.images[k].samples[0] == doctest::Approx(k / 255.0).epsilon(1e-12));
  }
  REQUIRE(loaded.truth.has_value());
  CHECK(loaded.truth->samples[0] == 128.0 / 255.0);
}

TEST_CASE("load_stack_dir accepts a calibrated output directory") {
  TempDir dir("cal_stack");
  for (int k : {1, 0}) {
    char name[16];
    std::snprintf(name, sizeof name, "cal%02d.png", k);
    save_image(Image(3, 3, 3, k / 255.0), dir.file(name));
  }
  save_image(Image(3, 3, 3, 0.5), dir.file("reference.png"));  // not cam*/cal*/truth.*

  LoadedStack loaded = load_stack_dir(dir.str());
  CHECK(loaded.stack.count() == 2);
  for (int k = 0; k < 2; ++k) {
    CHECK(loaded.stack.images[k].samples[0] == doctest::Approx(k / 255.0).epsilon(1e-12));
  }
  CHECK_FALSE(loaded.truth.has_value());

  // cam* wins when both prefixes are present
  save_image(Image(3, 3, 3, 0.9), dir.file("cam00.png"));
  CHECK(load_stack_dir(dir.str()).stack.count() == 1);
}

TEST_CASE("load_stack_dir without cameras explains what it expected") {
  TempDir dir("empty_stack");
  save_image(Image(3, 3, 3, 0.5), dir.file("truth.png"));
  const std::string msg = "'" + dir.str() + "' contains no cam* or cal* .{png,ppm,pgm} images";
  CHECK_THROWS_WITH_AS(load_stack_dir(dir.str()), msg.c_str(), Error);
}

TEST_CASE("I/O rejects unusable requests") {
  TempDir dir("badio");
  Image rgb(2, 2, 3, 0.5);
  CHECK_THROWS_AS(save_image(rgb, dir.file("x.txt")), Error);
  CHECK_THROWS_AS(save_image(rgb, dir.file("x.png"), 12), Error);
  Image gray(2, 2, 1, 0.5);
  CHECK_THROWS_WITH_AS(save_image(gray, dir.file("x.ppm")), "PPM stores RGB; image has 1 channel(s)",
                       Error);
  const std::string missing = dir.file("nope.png");
  CHECK_THROWS_WITH_AS(load_image(missing), ("no such file: '" + missing + "'").c_str(), Error);
}
