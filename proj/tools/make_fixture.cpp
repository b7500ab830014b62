// Renders the synthetic fixture: page PNGs carrying each element's text as an
// embedded pixel run, a native dataset, a layout detections file, plus the
// config and mock script sitting next to the fixture description.

#include <iostream>

#include <CLI11.hpp>

#include "fixture.hpp"

using namespace vrduqa;

int main(int argc, char** argv) {
  CLI::App app{"Render the synthetic test fixture"};
  fs::path fixture, out;
  app.add_option("fixture", fixture, "fixture description (fixture.json)")->required()->check(CLI::ExistingFile);
  app.add_option("out", out, "output directory")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    fixture::render(fixture, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << "fixture written to " << out.string() << "\n";
  return 0;
}
