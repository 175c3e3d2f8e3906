#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "model.hpp"

namespace mdsam {

// ---------------------------------------------------------------------------
// Flat archive of named arrays. Binary little-endian layout:
//   magic "MDSAMAR1" (8 bytes), u32 version, u64 entry count,
//   entries in insertion order:
//     u32 name_len, name bytes, u8 dtype,
//     dtype 0 (f64 tensor): u32 rank, u32 dims[rank], f64 data[]
//     dtype 1 (u64 array):  u64 count, u64 data[]
//     dtype 2 (raw bytes):  u64 count, bytes
// Insertion order is deterministic, so save -> load -> save is byte-stable.
// The same container backs checkpoints and pretrained-weight files.
// ---------------------------------------------------------------------------

class Archive {
 public:
  struct Entry {
    std::string name;
    std::uint8_t dtype = 0;
    Tensor tensor;                      // dtype 0
    std::vector<std::uint64_t> words;   // dtype 1
    std::string bytes;                  // dtype 2
  };

  void add_tensor(const std::string& name, const Tensor& t) {
    Entry e;
    e.name = name;
    e.dtype = 0;
    e.tensor = t;
    push(std::move(e));
  }

  void add_words(const std::string& name, std::vector<std::uint64_t> w) {
    Entry e;
    e.name = name;
    e.dtype = 1;
    e.words = std::move(w);
    push(std::move(e));
  }

  void add_bytes(const std::string& name, std::string b) {
    Entry e;
    e.name = name;
    e.dtype = 2;
    e.bytes = std::move(b);
    push(std::move(e));
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  const Entry& at(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("archive: no entry named '" + name + "'");
    return entries_[it->second];
  }

  const Tensor& tensor(const std::string& name) const {
    const Entry& e = at(name);
    if (e.dtype != 0) throw std::runtime_error("archive: entry '" + name + "' is not a tensor");
    return e.tensor;
  }

  std::uint64_t word(const std::string& name) const {
    const Entry& e = at(name);
    if (e.dtype != 1 || e.words.empty()) {
      throw std::runtime_error("archive: entry '" + name + "' is not a u64 value");
    }
    return e.words[0];
  }

  const std::vector<Entry>& entries() const { return entries_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write archive: " + path);
    out.write("MDSAMAR1", 8);
    write_u32(out, 1);
    write_u64(out, entries_.size());
    for (const Entry& e : entries_) {
      write_u32(out, static_cast<std::uint32_t>(e.name.size()));
      out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      out.put(static_cast<char>(e.dtype));
      switch (e.dtype) {
        case 0: {
          write_u32(out, static_cast<std::uint32_t>(e.tensor.rank()));
          for (int d = 0; d < e.tensor.rank(); ++d) {
            write_u32(out, static_cast<std::uint32_t>(e.tensor.dim(d)));
          }
          out.write(reinterpret_cast<const char*>(e.tensor.data()),
                    static_cast<std::streamsize>(e.tensor.size() * sizeof(Scalar)));
          break;
        }
        case 1: {
          write_u64(out, e.words.size());
          out.write(reinterpret_cast<const char*>(e.words.data()),
                    static_cast<std::streamsize>(e.words.size() * sizeof(std::uint64_t)));
          break;
        }
        default: {
          write_u64(out, e.bytes.size());
          out.write(e.bytes.data(), static_cast<std::streamsize>(e.bytes.size()));
        }
      }
    }
    if (!out) throw std::runtime_error("archive write failed: " + path);
  }

  static Archive load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open archive: " + path);
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, "MDSAMAR1", 8) != 0) {
      throw std::runtime_error("not an archive file: " + path);
    }
    const std::uint32_t version = read_u32(in);
    if (version != 1) throw std::runtime_error("unsupported archive version");
    const std::uint64_t count = read_u64(in);
    Archive ar;
    for (std::uint64_t i = 0; i < count; ++i) {
      Entry e;
      const std::uint32_t name_len = read_u32(in);
      e.name.resize(name_len);
      in.read(e.name.data(), name_len);
      e.dtype = static_cast<std::uint8_t>(in.get());
      switch (e.dtype) {
        case 0: {
          const std::uint32_t rank = read_u32(in);
          std::vector<int> shape(rank);
          for (auto& d : shape) d = static_cast<int>(read_u32(in));
          Tensor t(shape);
          in.read(reinterpret_cast<char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(Scalar)));
          e.tensor = std::move(t);
          break;
        }
        case 1: {
          e.words.resize(read_u64(in));
          in.read(reinterpret_cast<char*>(e.words.data()),
                  static_cast<std::streamsize>(e.words.size() * sizeof(std::uint64_t)));
          break;
        }
        case 2: {
          e.bytes.resize(read_u64(in));
          in.read(e.bytes.data(), static_cast<std::streamsize>(e.bytes.size()));
          break;
        }
        default:
          throw std::runtime_error("archive: unknown entry type in " + path);
      }
      if (!in) throw std::runtime_error("truncated archive: " + path);
      ar.push(std::move(e));
    }
    return ar;
  }

 private:
  void push(Entry e) {
    if (index_.count(e.name)) throw std::runtime_error("archive: duplicate entry " + e.name);
    index_[e.name] = entries_.size();
    entries_.push_back(std::move(e));
  }

  static void write_u32(std::ofstream& o, std::uint32_t v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static void write_u64(std::ofstream& o, std::uint64_t v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static std::uint32_t read_u32(std::ifstream& i) {
    std::uint32_t v = 0;
    i.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }
  static std::uint64_t read_u64(std::ifstream& i) {
    std::uint64_t v = 0;
    i.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }

  std::vector<Entry> entries_;
  std::map<std::string, size_t> index_;
};

// ---------------------------------------------------------------------------
// Pretrained weight import. Keys are bare parameter names ("encoder....",
// "decoder...."). Every key must match an existing parameter of the same
// shape; adapter weights are never pretrained and are rejected. Parameters
// not covered by the file keep their fresh initialization.
// ---------------------------------------------------------------------------

inline void import_pretrained(SodModel& model, const Archive& weights) {
  for (const auto& e : weights.entries()) {
    if (e.name.find(".lmsa.") != std::string::npos) {
      throw std::runtime_error("pretrained import: adapter weights are never pretrained: " +
                               e.name);
    }
    Param* p = model.find_param(e.name);
    if (!p) throw std::runtime_error("pretrained import: unknown key '" + e.name + "'");
    if (e.dtype != 0) throw std::runtime_error("pretrained import: '" + e.name + "' not a tensor");
    if (e.tensor.shape() != p->value().shape()) {
      throw std::runtime_error("pretrained import: shape mismatch for '" + e.name + "': file " +
                               e.tensor.shape_str() + " vs model " + p->value().shape_str());
    }
    p->value() = e.tensor;
  }
}

}  // namespace mdsam
