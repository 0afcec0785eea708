#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "downscale/core/tensor.hpp"

namespace downscale::io {

using nlohmann::json;

// Single-file array pack: fixed magic, 8-byte little-endian header length,
// JSON header describing named float32 arrays, then raw payload bytes.
inline constexpr char kMagic[8] = {'D', 'S', 'C', 'P', 'A', 'C', 'K', '1'};
inline constexpr int kFormatVersion = 1;

struct ArrayMeta {
    std::string name;
    std::vector<std::string> dims;
    std::vector<std::int64_t> shape;
    std::int64_t offset = 0;  // bytes from payload start
    json attrs = json::object();

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
};

class ContainerWriter {
  public:
    explicit ContainerWriter(std::string path) : path_(std::move(path)) {}

    json& attrs() { return attrs_; }

    void add(const std::string& name, std::vector<std::string> dims, const Tensorf& t,
             json array_attrs = json::object()) {
        if (dims.size() != t.shape().size())
            fail<ShapeError>("container: dim names do not match rank for " + name);
        for (auto& m : metas_)
            if (m.name == name) fail<IoError>("container: duplicate array " + name);
        ArrayMeta m;
        m.name = name;
        m.dims = std::move(dims);
        m.shape = t.shape();
        m.offset = payload_bytes_;
        m.attrs = std::move(array_attrs);
        metas_.push_back(std::move(m));
        payload_.push_back(t);
        payload_bytes_ += t.numel() * static_cast<std::int64_t>(sizeof(float));
    }

    void finish() {
        json header;
        header["format"] = "downscale-pack";
        header["version"] = kFormatVersion;
        header["attrs"] = attrs_;
        header["arrays"] = json::array();
        for (auto& m : metas_) {
            json a;
            a["name"] = m.name;
            a["dims"] = m.dims;
            a["shape"] = m.shape;
            a["offset"] = m.offset;
            a["dtype"] = "f32";
            a["attrs"] = m.attrs;
            header["arrays"].push_back(std::move(a));
        }
        const std::string hs = header.dump();
        std::ofstream f(path_, std::ios::binary | std::ios::trunc);
        if (!f) fail<IoError>("cannot write " + path_);
        f.write(kMagic, 8);
        const std::uint64_t hlen = hs.size();
        f.write(reinterpret_cast<const char*>(&hlen), 8);
        f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        for (auto& t : payload_)
            f.write(reinterpret_cast<const char*>(t.data()),
                    static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!f) fail<IoError>("short write to " + path_);
    }

  private:
    std::string path_;
    json attrs_ = json::object();
    std::vector<ArrayMeta> metas_;
    std::vector<Tensorf> payload_;
    std::int64_t payload_bytes_ = 0;
};

class Container {
  public:
    static Container open(const std::string& path) {
        Container c;
        c.path_ = path;
        c.file_.open(path, std::ios::binary);
        if (!c.file_) fail<IoError>("cannot open " + path);
        char magic[8];
        c.file_.read(magic, 8);
        if (!c.file_ || std::memcmp(magic, kMagic, 8) != 0)
            fail<IoError>(path + " is not an array pack");
        std::uint64_t hlen = 0;
        c.file_.read(reinterpret_cast<char*>(&hlen), 8);
        std::string hs(hlen, '\0');
        c.file_.read(hs.data(), static_cast<std::streamsize>(hlen));
        if (!c.file_) fail<IoError>("truncated header in " + path);
        json header = json::parse(hs, nullptr, false);
        if (header.is_discarded() || header.value("format", "") != "downscale-pack")
            fail<IoError>("bad header in " + path);
        c.version_ = header.value("version", 0);
        c.attrs_ = header.value("attrs", json::object());
        for (auto& a : header.at("arrays")) {
            ArrayMeta m;
            m.name = a.at("name").get<std::string>();
            m.dims = a.at("dims").get<std::vector<std::string>>();
            m.shape = a.at("shape").get<std::vector<std::int64_t>>();
            m.offset = a.at("offset").get<std::int64_t>();
            m.attrs = a.value("attrs", json::object());
            c.order_.push_back(m.name);
            c.metas_[m.name] = std::move(m);
        }
        c.payload_start_ = 16 + static_cast<std::int64_t>(hlen);
        return c;
    }

    const json& attrs() const { return attrs_; }
    int version() const { return version_; }
    const std::vector<std::string>& names() const { return order_; }
    bool has(const std::string& name) const { return metas_.count(name) > 0; }

    const ArrayMeta& meta(const std::string& name) const {
        auto it = metas_.find(name);
        if (it == metas_.end()) fail<IoError>(path_ + ": no array named " + name);
        return it->second;
    }

    Tensorf read(const std::string& name) {
        const ArrayMeta& m = meta(name);
        Tensorf t(m.shape);
        file_.seekg(payload_start_ + m.offset);
        file_.read(reinterpret_cast<char*>(t.data()),
                   static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!file_) fail<IoError>(path_ + ": truncated payload for " + name);
        return t;
    }

  private:
    std::string path_;
    std::ifstream file_;
    int version_ = 0;
    json attrs_;
    std::vector<std::string> order_;
    std::map<std::string, ArrayMeta> metas_;
    std::int64_t payload_start_ = 0;
};

}  // namespace downscale::io
