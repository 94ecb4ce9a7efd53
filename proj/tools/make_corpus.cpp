// Writes procedural street scenes as scene_<i>.png plus depth/scene_<i>.pgm.
// Depth codes are metres (load with --meters-per-unit 0.001 to work in km).
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "weatherfit/bench/corpus.hpp"
#include "weatherfit/io.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: make_corpus OUT_DIR [COUNT=8] [SEED=1] [SIZE=128]\n");
    return 2;
  }
  namespace fs = std::filesystem;
  const fs::path dir = argv[1];
  const auto count = static_cast<std::size_t>(argc > 2 ? std::atoi(argv[2]) : 8);
  const auto seed = static_cast<std::uint64_t>(argc > 3 ? std::atoll(argv[3]) : 1);
  weatherfit::bench::CorpusOptions opt;
  opt.width = opt.height = argc > 4 ? std::atoi(argv[4]) : 128;
  try {
    fs::create_directories(dir / "depth");
    const auto scenes = weatherfit::bench::make_corpus(count, seed, opt);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "scene_%03zu", i);
      weatherfit::save_image(scenes[i].image, dir / (std::string(stem) + ".png"));
      weatherfit::save_depth(*scenes[i].depth, dir / "depth" / (std::string(stem) + ".pgm"), 0.001);
    }
    std::printf("wrote %zu scenes to %s\n", scenes.size(), dir.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
