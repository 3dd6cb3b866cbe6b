// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sada/common.hpp"
#include "sada/tensor.hpp"

namespace sada {

// Self-describing keyed binary archive: magic, entry count, then per entry
// key string, dtype tag, rank, dims, raw data. Used for checkpoints and
// replay-buffer snapshots.

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1, u8 = 2, i64 = 3, u64 = 4 };

template <class T> struct dtype_of;
template <> struct dtype_of<float> { static constexpr Dtype value = Dtype::f32; };
template <> struct dtype_of<double> { static constexpr Dtype value = Dtype::f64; };
template <> struct dtype_of<std::uint8_t> { static constexpr Dtype value = Dtype::u8; };
template <> struct dtype_of<std::int64_t> { static constexpr Dtype value = Dtype::i64; };
template <> struct dtype_of<std::uint64_t> { static constexpr Dtype value = Dtype::u64; };

class ArchiveWriter {
  public:
    explicit ArchiveWriter(const std::string& path) : path_(path) {}

    template <class T>
    void put(const std::string& key, const std::vector<int>& shape, const T* data,
             std::size_t count) {
        Entry e;
        e.dtype = dtype_of<T>::value;
        e.shape = shape;
        e.bytes.resize(count * sizeof(T));
        std::memcpy(e.bytes.data(), data, e.bytes.size());
        entries_[key] = std::move(e);
    }

    template <class T>
    void put_tensor(const std::string& key, const Tensor<T>& t) {
        put(key, t.shape, t.data.data(), t.data.size());
    }

    template <class T>
    void put_scalar(const std::string& key, T v) {
        put(key, {1}, &v, 1);
    }

    void save() const {
        std::ofstream f(path_, std::ios::binary);
        if (!f) throw IoError("cannot open for write: " + path_);
        f.write(kMagic, 8);
        write_u64(f, entries_.size());
        for (const auto& [key, e] : entries_) {
            write_u64(f, key.size());
            f.write(key.data(), std::streamsize(key.size()));
            const auto dt = static_cast<std::uint8_t>(e.dtype);
            f.write(reinterpret_cast<const char*>(&dt), 1);
            write_u64(f, e.shape.size());
            for (int d : e.shape) write_u64(f, std::uint64_t(d));
            write_u64(f, e.bytes.size());
            f.write(reinterpret_cast<const char*>(e.bytes.data()),
                    std::streamsize(e.bytes.size()));
        }
        if (!f) throw IoError("write failed: " + path_);
    }

  private:
    struct Entry {
        Dtype dtype;
        std::vector<int> shape;
        std::vector<std::uint8_t> bytes;
    };
    static constexpr const char kMagic[9] = "SADAARCH";
    std::string path_;
    std::map<std::string, Entry> entries_;

    static void write_u64(std::ofstream& f, std::uint64_t v) {
        f.write(reinterpret_cast<const char*>(&v), 8);
    }
};

class ArchiveReader {
  public:
    explicit ArchiveReader(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open: " + path);
        char magic[8];
        f.read(magic, 8);
        if (!f || std::memcmp(magic, "SADAARCH", 8) != 0)
            throw IoError("not an archive: " + path);
        const std::uint64_t n = read_u64(f, path);
        for (std::uint64_t i = 0; i < n; ++i) {
            const std::uint64_t klen = read_u64(f, path);
            std::string key(klen, '\0');
            f.read(key.data(), std::streamsize(klen));
            Entry e;
            std::uint8_t dt;
            f.read(reinterpret_cast<char*>(&dt), 1);
            e.dtype = static_cast<Dtype>(dt);
            const std::uint64_t rank = read_u64(f, path);
            e.shape.resize(rank);
            for (auto& d : e.shape) d = int(read_u64(f, path));
            const std::uint64_t nbytes = read_u64(f, path);
            e.bytes.resize(nbytes);
            f.read(reinterpret_cast<char*>(e.bytes.data()), std::streamsize(nbytes));
            if (!f) throw IoError("truncated archive: " + path);
            entries_[key] = std::move(e);
        }
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::vector<std::string> keys() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [k, _] : entries_) out.push_back(k);
        return out;
    }

    template <class T>
    Tensor<T> get_tensor(const std::string& key) const {
        const Entry& e = find(key);
        if (e.dtype != dtype_of<T>::value) throw IoError("dtype mismatch for key " + key);
        Tensor<T> t(e.shape);
        std::memcpy(t.data.data(), e.bytes.data(), e.bytes.size());
        return t;
    }

    template <class T>
    T get_scalar(const std::string& key) const {
        const Entry& e = find(key);
        if (e.dtype != dtype_of<T>::value || e.bytes.size() != sizeof(T))
            throw IoError("scalar mismatch for key " + key);
        T v;
        std::memcpy(&v, e.bytes.data(), sizeof(T));
        return v;
    }

    const std::vector<int>& shape(const std::string& key) const { return find(key).shape; }

  private:
    struct Entry {
        Dtype dtype;
        std::vector<int> shape;
        std::vector<std::uint8_t> bytes;
    };
    std::map<std::string, Entry> entries_;

    const Entry& find(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) throw IoError("missing archive key: " + key);
        return it->second;
    }

    static std::uint64_t read_u64(std::ifstream& f, const std::string& path) {
        std::uint64_t v;
        f.read(reinterpret_cast<char*>(&v), 8);
        if (!f) throw IoError("truncated archive: " + path);
        return v;
    }
};

}  // namespace sada
