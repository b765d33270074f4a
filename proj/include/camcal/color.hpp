#pragma once

namespace camcal {

// CIELAB coordinates. L in [0,100]; a/b are opponent axes.
struct Lab {
  double l = 0.0;
  double a = 0.0;
  double b = 0.0;
};

// sRGB transfer function (display-referred values in [0,1]).
double srgb_to_linear(double s);
double linear_to_srgb(double s);

// sRGB -> CIELAB under D65. All conversion constants live in color.cpp and
// are covered by round-trip tests.
Lab srgb_to_lab(double r, double g, double b);
void lab_to_srgb(const Lab& lab, double& r, double& g, double& b);

inline Lab gray_to_lab(double v) { return srgb_to_lab(v, v, v); }

}  // namespace camcal
