// Writes the default refraction field as udisp.pgm / vdisp.pgm.
#include <cstdio>
#include <filesystem>

#include "weatherfit/models/displacement.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : ".";
  const auto field = weatherfit::default_displacement();
  weatherfit::save_displacement(field, dir / "udisp.pgm", dir / "vdisp.pgm");
  std::printf("wrote %s and %s\n", (dir / "udisp.pgm").c_str(), (dir / "vdisp.pgm").c_str());
  return 0;
}
