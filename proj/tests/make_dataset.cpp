// Writes synthetic panoramas in the dataset layout: make_dataset <root> <width> <height> <id>...

#include <cstdio>
#include <exception>
#include <string>

#include "mtpano/codec.hpp"
#include "mtpano/pipeline.hpp"
#include "mtpano/synthetic.hpp"

using namespace mtpano;

int main(int argc, char** argv) {
  if (argc < 5) {
    std::fprintf(stderr, "usage: %s <root> <width> <height> <id>...\n", argv[0]);
    return 2;
  }
  try {
    const std::filesystem::path root = argv[1];
    const int w = std::stoi(argv[2]), h = std::stoi(argv[3]);
    for (int i = 4; i < argc; ++i) {
      const std::string id = argv[i];
      write_png(layout::pano_input(root, id, Task::Rgb), encode_task(synthetic::rgb_pano(w, h, i), Task::Rgb));
      write_png(layout::pano_input(root, id, Task::Depth), encode_task(synthetic::depth_pano(w, h), Task::Depth));
      write_png(layout::pano_input(root, id, Task::Normal), encode_task(synthetic::normal_pano(w, h), Task::Normal));
      write_png(layout::pano_input(root, id, Task::Semantic),
                encode_task(synthetic::semantic_pano(w, h), Task::Semantic));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  }
  return 0;
}
