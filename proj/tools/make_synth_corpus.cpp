#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "synth_corpus.hpp"

int main(int argc, char** argv) {
  CLI::App app{"write a deterministic synthetic byte corpus"};
  std::string out_path = "synth.txt";
  uint64_t seed = 7;
  size_t bytes = 1'000'000;
  app.add_option("--out", out_path, "output file");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--bytes", bytes, "corpus size in bytes");
  CLI11_PARSE(app, argc, argv);

  std::string text = dctlm::make_synthetic_corpus(seed, bytes);
  std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
  if (!f) {
    std::cerr << "cannot write " << out_path << "\n";
    return 1;
  }
  f << text;
  std::cout << "wrote " << text.size() << " bytes to " << out_path << "\n";
  return 0;
}
