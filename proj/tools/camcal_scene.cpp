// Emits procedural truth scenes as image files, for feeding `camcal run`
// configs that want file-based truth inputs.
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "camcal/error.hpp"
#include "camcal/image_io.hpp"
#include "camcal/scene.hpp"

int main(int argc, char** argv) {
  CLI::App app{"procedural test scene generator"};
  int variant = 0, width = 128, height = 128, bit_depth = 8;
  bool gray = false;
  std::string out = "scene.png";
  app.add_option("--variant", variant, "scene variant");
  app.add_option("--width", width, "pixels");
  app.add_option("--height", height, "pixels");
  app.add_option("--bit-depth", bit_depth, "8 or 16")->check(CLI::IsMember({8, 16}));
  app.add_flag("--gray", gray, "single channel");
  app.add_option("--out", out, "output image path (.png/.ppm/.pgm)");
  CLI11_PARSE(app, argc, argv);

  try {
    camcal::Image img = camcal::make_scene(variant, width, height, gray ? 1 : 3);
    camcal::save_image(img, out, bit_depth);
    std::cout << "wrote " << out << "\n";
  } catch (const camcal::Error& e) {
    std::cerr << "camcal-scene: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
