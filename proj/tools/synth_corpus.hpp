#pragma once

// Deterministic markup-flavored word-soup corpus for tests and smoke runs.
// Small alphabet (lowercase words, light punctuation, a few XML-ish tags),
// Zipf-skewed word choice: structured enough that a character model learns
// it quickly, varied enough that it can't be memorized outright.

#include <cstdint>
#include <string>
#include <vector>

#include "dctlm/rng.hpp"

namespace dctlm {

inline std::string make_synthetic_corpus(uint64_t seed, size_t target_bytes) {
  Rng rng(seed);

  std::vector<std::string> words = {"the", "of",   "and",  "a",    "in",   "to",  "is",
                                    "was", "it",   "for",  "on",   "as",   "by",  "with",
                                    "at",  "from", "that", "are",  "this", "be",  "or",
                                    "an",  "which", "were", "not",  "also", "has", "had"};
  const std::string letters = "etaoinshrdlucmfwypvbgkjqxz";
  while (words.size() < 420) {
    int len = 3 + (int)rng.bounded(7);
    std::string w;
    for (int i = 0; i < len; ++i) {
      // skew letter choice toward the common end of the list
      double u = rng.next_double();
      w += letters[(size_t)(u * u * (double)letters.size())];
    }
    words.push_back(std::move(w));
  }

  auto pick_word = [&]() -> const std::string& {
    double u = rng.next_double();
    return words[(size_t)(u * u * (double)words.size())];
  };

  std::string out;
  out.reserve(target_bytes + 4096);
  while (out.size() < target_bytes) {
    out += "<doc>\n";
    int paragraphs = 2 + (int)rng.bounded(4);
    for (int p = 0; p < paragraphs && out.size() < target_bytes; ++p) {
      out += "<p>";
      int sentences = 2 + (int)rng.bounded(4);
      for (int s = 0; s < sentences; ++s) {
        int n = 4 + (int)rng.bounded(9);
        for (int i = 0; i < n; ++i) {
          if (i) out += (rng.next_double() < 0.08) ? ", " : " ";
          const std::string& w = pick_word();
          double style = rng.next_double();
          if (style < 0.04) {
            out += "<em>" + w + "</em>";
          } else if (style < 0.06) {
            out += "<link ref=\"" + w + "\">" + w + "</link>";
          } else {
            out += w;
          }
        }
        out += ".";
        if (s + 1 < sentences) out += " ";
      }
      out += "</p>\n";
    }
    out += "</doc>\n";
  }
  out.resize(target_bytes);
  return out;
}

}  // namespace dctlm
