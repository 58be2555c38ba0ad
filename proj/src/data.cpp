#include "dctlm/data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dctlm {

SplitSpec SplitSpec::parse(std::string_view s) {
  SplitSpec out;
  double vals[3];
  size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    size_t slash = (i < 2) ? s.find('/', pos) : s.size();
    if (slash == std::string_view::npos)
      throw std::invalid_argument("split must be train/valid/test, got '" + std::string(s) + "'");
    std::string part(s.substr(pos, slash - pos));
    try {
      size_t used = 0;
      vals[i] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad split component '" + part + "'");
    }
    if (vals[i] < 0) throw std::invalid_argument("split components must be non-negative");
    pos = slash + 1;
  }
  if (vals[0] + vals[1] + vals[2] <= 0) throw std::invalid_argument("split weights sum to zero");
  if (vals[0] <= 0) throw std::invalid_argument("train split weight must be positive");
  out.train = vals[0];
  out.valid = vals[1];
  out.test = vals[2];
  return out;
}

std::string SplitSpec::to_string() const {
  std::ostringstream os;
  os << train << '/' << valid << '/' << test;
  return os.str();
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + std::string(s) + "' (want train|valid|test)");
}

const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    default: return "test";
  }
}

Corpus Corpus::load(const std::string& path, const SplitSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw std::runtime_error("error reading corpus file '" + path + "'");
  return from_bytes(std::move(bytes), spec);
}

Corpus Corpus::from_bytes(std::vector<uint8_t> bytes, const SplitSpec& spec) {
  if (bytes.empty()) throw std::runtime_error("corpus is empty");
  Corpus c;
  c.bytes_ = std::move(bytes);

  const double total = spec.train + spec.valid + spec.test;
  const size_t n = c.bytes_.size();
  size_t train_len = (size_t)std::llround((double)n * spec.train / total);
  if (train_len == 0) train_len = 1;
  if (train_len > n) train_len = n;
  size_t valid_len = (size_t)std::llround((double)n * spec.valid / total);
  if (train_len + valid_len > n) valid_len = n - train_len;
  c.train_len_ = train_len;
  c.valid_len_ = valid_len;

  c.map_.fill(-1);
  bool seen[256] = {};
  for (size_t i = 0; i < train_len; ++i) seen[c.bytes_[i]] = true;
  int next = 0;
  for (int b = 0; b < 256; ++b)
    if (seen[b]) c.map_[b] = next++;
  bool any_unknown = false;
  for (size_t i = train_len; i < n; ++i)
    if (c.map_[c.bytes_[i]] < 0) any_unknown = true;
  c.unk_ = any_unknown ? next : -1;
  c.vocab_ = next + (any_unknown ? 1 : 0);
  return c;
}

int32_t Corpus::id_of_byte(uint8_t b) const {
  int32_t id = map_[b];
  return id >= 0 ? id : unk_;
}

size_t Corpus::split_begin(Split s) const {
  switch (s) {
    case Split::kTrain: return 0;
    case Split::kValid: return train_len_;
    default: return train_len_ + valid_len_;
  }
}

size_t Corpus::split_length(Split s) const {
  switch (s) {
    case Split::kTrain: return train_len_;
    case Split::kValid: return valid_len_;
    default: return bytes_.size() - train_len_ - valid_len_;
  }
}

void Corpus::override_vocab(const std::array<int32_t, 256>& map, int vocab, int32_t unk) {
  map_ = map;
  vocab_ = vocab;
  unk_ = unk;
  if (unk_ < 0) {
    for (uint8_t b : bytes_)
      if (map_[b] < 0)
        throw std::runtime_error(
            "corpus contains byte " + std::to_string((int)b) +
            " that the checkpoint vocabulary cannot represent (no unknown id)");
  }
}

std::string Corpus::export_vocab() const {
  std::ostringstream os;
  for (int b = 0; b < 256; ++b)
    if (map_[b] >= 0) os << b << '\t' << map_[b] << '\n';
  if (unk_ >= 0) os << "unk\t" << unk_ << '\n';
  return os.str();
}

BatchStream::BatchStream(const Corpus& corpus, Split split, int batch, int span)
    : corpus_(&corpus), batch_(batch), span_(span) {
  if (batch < 1 || span < 1) throw std::invalid_argument("batch and span must be >= 1");
  begin_ = corpus.split_begin(split);
  size_t len = corpus.split_length(split);
  lane_len_ = len / (size_t)batch;
  // Each segment consumes T inputs and needs one lookahead byte for the last
  // target, so a lane must hold at least T+1 bytes.
  if (lane_len_ < (size_t)span + 1)
    throw std::runtime_error(std::string("split '") + to_string(split) +
                             "' too short: lanes of " + std::to_string(lane_len_) +
                             " bytes cannot fill span " + std::to_string(span));
  segments_ = (int64_t)((lane_len_ - 1) / (size_t)span);
}

Batch BatchStream::batch(int64_t step) const {
  if (step < 0) throw std::invalid_argument("step must be non-negative");
  Batch out;
  out.batch = batch_;
  out.span = span_;
  out.inputs.resize((size_t)batch_ * span_);
  out.targets.resize((size_t)batch_ * span_);
  const int64_t seg = step % segments_;
  for (int b = 0; b < batch_; ++b) {
    const size_t lane0 = begin_ + (size_t)b * lane_len_;
    const size_t off = lane0 + (size_t)seg * span_;
    for (int t = 0; t < span_; ++t) {
      out.inputs[(size_t)b * span_ + t] = corpus_->id_at(off + t);
      out.targets[(size_t)b * span_ + t] = corpus_->id_at(off + t + 1);
    }
  }
  return out;
}

}  // namespace dctlm
