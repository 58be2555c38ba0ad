#include "dctlm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written as raw little-endian doubles");

namespace dctlm {

using nlohmann::json;

TensorRecord& Checkpoint::add(std::string name, std::string role, bool trainable,
                              Matrix value, PlanPtr plan) {
  TensorRecord rec;
  rec.name = std::move(name);
  rec.role = std::move(role);
  rec.trainable = trainable;
  rec.value = std::move(value);
  rec.plan = std::move(plan);
  tensors.push_back(std::move(rec));
  return tensors.back();
}

const TensorRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void Checkpoint::save(const std::string& path) const {
  json header;
  header["config_text"] = config_text;
  header["step"] = step;
  if (has_best)
    header["best_valid_bpc"] = best_valid_bpc;
  else
    header["best_valid_bpc"] = nullptr;
  header["rng"] = {{"state", std::to_string(rng_state)}, {"inc", std::to_string(rng_inc)}};
  header["vocab"] = {{"map", byte_map}, {"size", vocab_size}, {"unk", unknown_id}};

  json tens = json::array();
  uint64_t offset = 0;
  for (const auto& t : tensors) {
    json j;
    j["name"] = t.name;
    j["role"] = t.role;
    j["trainable"] = t.trainable;
    j["rows"] = t.value.rows();
    j["cols"] = t.value.cols();
    j["offset"] = offset;
    if (t.plan) {
      j["plan"] = {{"n", t.plan->n},
                   {"m", t.plan->m},
                   {"c", t.plan->c},
                   {"corner", to_string(t.plan->corner)},
                   {"order_version", PackingPlan::kOrderVersion}};
    }
    tens.push_back(std::move(j));
    offset += (uint64_t)t.value.rows() * t.value.cols();
  }
  header["tensors"] = std::move(tens);

  const std::string head = header.dump();  // std::map keys -> deterministic order
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out.write(kMagic, 8);
  uint32_t ver = kFormatVersion;
  out.write(reinterpret_cast<const char*>(&ver), 4);
  uint64_t hlen = head.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(head.data(), (std::streamsize)head.size());
  std::vector<double> buf;
  for (const auto& t : tensors) {
    const size_t count = t.value.size();
    buf.resize(count);
    for (size_t i = 0; i < count; ++i) buf[i] = (double)t.value.flat()[i];
    out.write(reinterpret_cast<const char*>(buf.data()), (std::streamsize)(count * 8));
  }
  out.flush();
  if (!out) throw std::runtime_error("error writing checkpoint '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("'" + path + "' is not a checkpoint (bad magic)");
  uint32_t ver = 0;
  in.read(reinterpret_cast<char*>(&ver), 4);
  if (ver != kFormatVersion)
    throw std::runtime_error("checkpoint format version " + std::to_string(ver) +
                             " unsupported (expected " + std::to_string(kFormatVersion) + ")");
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  std::string head(hlen, '\0');
  in.read(head.data(), (std::streamsize)hlen);
  if (!in) throw std::runtime_error("truncated checkpoint header in '" + path + "'");

  json header;
  try {
    header = json::parse(head);
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt checkpoint header in '" + path + "': " + e.what());
  }

  Checkpoint ck;
  ck.config_text = header.at("config_text").get<std::string>();
  ck.step = header.at("step").get<int64_t>();
  if (header.at("best_valid_bpc").is_null()) {
    ck.has_best = false;
  } else {
    ck.has_best = true;
    ck.best_valid_bpc = header.at("best_valid_bpc").get<double>();
  }
  ck.rng_state = std::stoull(header.at("rng").at("state").get<std::string>());
  ck.rng_inc = std::stoull(header.at("rng").at("inc").get<std::string>());
  const auto& vmap = header.at("vocab").at("map");
  if (vmap.size() != 256) throw std::runtime_error("checkpoint vocab map must have 256 entries");
  for (int i = 0; i < 256; ++i) ck.byte_map[(size_t)i] = vmap[(size_t)i].get<int32_t>();
  ck.vocab_size = header.at("vocab").at("size").get<int>();
  ck.unknown_id = header.at("vocab").at("unk").get<int32_t>();

  uint64_t expect_offset = 0;
  std::vector<double> buf;
  for (const auto& j : header.at("tensors")) {
    TensorRecord rec;
    rec.name = j.at("name").get<std::string>();
    rec.role = j.at("role").get<std::string>();
    rec.trainable = j.at("trainable").get<bool>();
    int rows = j.at("rows").get<int>();
    int cols = j.at("cols").get<int>();
    if (j.at("offset").get<uint64_t>() != expect_offset)
      throw std::runtime_error("checkpoint tensor '" + rec.name + "' has inconsistent offset");
    if (j.contains("plan")) {
      const auto& p = j.at("plan");
      if (p.at("order_version").get<int32_t>() != PackingPlan::kOrderVersion)
        throw std::runtime_error("checkpoint tensor '" + rec.name +
                                 "' uses an unsupported coefficient order version");
      rec.plan = PackingPlan::make(p.at("n").get<int>(), p.at("m").get<int>(),
                                   p.at("c").get<int>(),
                                   corner_from_string(p.at("corner").get<std::string>()));
    }
    rec.value = Matrix(rows, cols);
    const size_t count = (size_t)rows * cols;
    buf.resize(count);
    in.read(reinterpret_cast<char*>(buf.data()), (std::streamsize)(count * 8));
    if (!in) throw std::runtime_error("truncated checkpoint payload in '" + path + "'");
    for (size_t i = 0; i < count; ++i) rec.value.flat()[i] = (real_t)buf[i];
    expect_offset += count;
    ck.tensors.push_back(std::move(rec));
  }
  return ck;
}

}  // namespace dctlm
