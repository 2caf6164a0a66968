// SPDX-License-Identifier: Apache-2.0
#include "dsbias/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dsbias/config.hpp"
#include "dsbias/error.hpp"

namespace dsbias {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'X', 'R', 'B', 'C', 'K', 'P', 'T', '\0'};

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string& b) : bytes_(b) {}
  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void floats(float* dst, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void put_floats(std::string& out, const Tensor<float>& t) {
  out.append(reinterpret_cast<const char*>(t.data()), t.numel() * sizeof(float));
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string config_text(const ModelBundle& b) {
  KeyValueDoc d;
  d.set("model.arch", b.model.arch);
  d.set("model.input_size", std::to_string(b.model.input_size));
  d.set("model.channels", join(b.model.stage_channels()));
  d.set("model.hidden", std::to_string(b.model.hidden));
  d.set("model.n_classes", std::to_string(b.model.n_classes));
  d.set("model.seed", std::to_string(b.model.seed));
  d.set("task", std::string(task_name(b.prep.task)));
  d.set("ablation.patch_size", std::to_string(b.prep.black_patch()));
  d.set("ablation.shuffle", std::string(shuffle_name(b.prep.shuffle)));
  d.set("ablation.shuffle_patch", std::to_string(b.prep.shuffle_tile()));
  d.set("ablation.seed", std::to_string(b.prep.seed));
  std::string labels;
  for (std::size_t i = 0; i < b.labels.size(); ++i) labels += (i ? "," : "") + b.labels[i];
  d.set("labels", labels);
  return d.serialize();
}

}  // namespace

std::string encode_checkpoint(ModelBundle& b) {
  auto params = b.net.params();
  if (b.opt.m.size() != params.size() || b.opt.v.size() != params.size())
    throw InvalidInput("checkpoint: optimizer state does not match parameters");
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string cfg = config_text(b);
  put<std::uint64_t>(out, cfg.size());
  out += cfg;
  put<std::uint64_t>(out, b.opt.step);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto* p = params[k];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rank()));
    for (auto d : p->value.shape()) put<std::uint64_t>(out, d);
    put_floats(out, p->value);
    put_floats(out, b.opt.m[k]);
    put_floats(out, b.opt.v[k]);
  }
  return out;
}

ModelBundle decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.str(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw DataError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto cfg_len = r.get<std::uint64_t>();
  auto doc = KeyValueDoc::parse(r.str(cfg_len), "checkpoint");

  ModelBundle b;
  b.model.arch = doc.require_string("model.arch");
  b.model.input_size = static_cast<std::size_t>(doc.get_int("model.input_size", 0));
  for (auto c : doc.get_int_list("model.channels", {})) b.model.channels.push_back(static_cast<std::size_t>(c));
  b.model.hidden = static_cast<std::size_t>(doc.get_int("model.hidden", 64));
  b.model.n_classes = static_cast<std::size_t>(doc.get_int("model.n_classes", 0));
  b.model.seed = static_cast<std::uint64_t>(doc.get_int("model.seed", 0));
  b.prep.task = parse_task(doc.require_string("task"));
  b.prep.input_size = b.model.input_size;
  b.prep.patch_size = static_cast<std::size_t>(doc.get_int("ablation.patch_size", 0));
  b.prep.shuffle = parse_shuffle(doc.get_string("ablation.shuffle", "none"));
  b.prep.shuffle_patch = static_cast<std::size_t>(doc.get_int("ablation.shuffle_patch", 0));
  b.prep.seed = static_cast<std::uint64_t>(doc.get_int("ablation.seed", 0));
  std::stringstream ls(doc.get_string("labels", ""));
  for (std::string l; std::getline(ls, l, ',');) b.labels.push_back(l);
  doc.check_all_used();

  b.net = build_network<float>(b.model);
  auto params = b.net.params();
  b.opt = AdamState<float>::zeros(params);
  b.opt.step = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  if (count != params.size())
    throw DataError("checkpoint holds " + std::to_string(count) + " tensors, architecture has " +
                    std::to_string(params.size()));
  for (std::size_t k = 0; k < count; ++k) {
    auto* p = params[k];
    const std::string name = r.str(r.get<std::uint32_t>());
    if (name != p->name) throw DataError("checkpoint tensor '" + name + "' where '" + p->name + "' was expected");
    const auto rank = r.get<std::uint32_t>();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    if (shape != p->value.shape()) throw DataError("checkpoint tensor '" + name + "' has the wrong shape");
    r.floats(p->value.data(), p->value.numel());
    r.floats(b.opt.m[k].data(), p->value.numel());
    r.floats(b.opt.v[k].data(), p->value.numel());
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint");
  return b;
}

void save_checkpoint(ModelBundle& bundle, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(bundle);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("failed writing checkpoint " + path.string());
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace dsbias
