#include "adasiam/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

static_assert(std::endian::native == std::endian::little, "blob IO assumes a little-endian host");

namespace adasiam {

static std::string shape_token(const Tensor& t) {
    std::string s;
    for (int i = 0; i < t.rank(); ++i) {
        if (i) s += 'x';
        s += std::to_string(t.dim(i));
    }
    return s;
}

static std::vector<int> parse_shape_token(const std::string& tok, const std::string& where) {
    std::vector<int> shape;
    std::size_t pos = 0;
    while (pos < tok.size()) {
        std::size_t next = tok.find('x', pos);
        std::string part = tok.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        try {
            shape.push_back(std::stoi(part));
        } catch (const std::exception&) {
            throw std::runtime_error(where + ": bad shape token '" + tok + "'");
        }
        if (shape.back() <= 0) throw std::runtime_error(where + ": bad shape token '" + tok + "'");
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    if (shape.empty()) throw std::runtime_error(where + ": bad shape token '" + tok + "'");
    return shape;
}

void save_checkpoint(const std::string& prefix, const ParamSet& params) {
    std::string manifest_path = prefix + ".manifest";
    std::string blob_path = prefix + ".blob";
    std::ofstream manifest(manifest_path, std::ios::binary);
    if (!manifest) throw std::runtime_error("cannot write " + manifest_path);
    std::ofstream blob(blob_path, std::ios::binary);
    if (!blob) throw std::runtime_error("cannot write " + blob_path);

    std::uint64_t offset = 0;
    for (const auto& [name, t] : params.items()) {
        manifest << name << ' ' << shape_token(t) << " f32 " << offset << '\n';
        std::vector<float> buf(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) buf[i] = static_cast<float>(t[i]);
        blob.write(reinterpret_cast<const char*>(buf.data()),
                   static_cast<std::streamsize>(buf.size() * sizeof(float)));
        offset += buf.size() * sizeof(float);
    }
    if (!manifest || !blob) throw std::runtime_error("short write under " + prefix);
}

ParamSet load_checkpoint(const std::string& prefix) {
    std::string manifest_path = prefix + ".manifest";
    std::string blob_path = prefix + ".blob";
    std::ifstream manifest(manifest_path, std::ios::binary);
    if (!manifest) throw std::runtime_error("cannot open " + manifest_path);
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) throw std::runtime_error("cannot open " + blob_path);

    ParamSet params;
    std::string line;
    int lineno = 0;
    while (std::getline(manifest, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::string where = manifest_path + ":" + std::to_string(lineno);
        std::istringstream iss(line);
        std::string name, shape_tok, dtype;
        std::uint64_t offset = 0;
        if (!(iss >> name >> shape_tok >> dtype >> offset))
            throw std::runtime_error(where + ": malformed manifest line");
        if (dtype != "f32") throw std::runtime_error(where + ": unsupported dtype '" + dtype + "'");
        std::vector<int> shape = parse_shape_token(shape_tok, where);
        Tensor t(shape);
        std::vector<float> buf(t.size());
        blob.seekg(static_cast<std::streamoff>(offset));
        blob.read(reinterpret_cast<char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (blob.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
            throw std::runtime_error(blob_path + ": truncated blob reading tensor '" + name + "'");
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(buf[i]);
        params.add(name, std::move(t));
    }
    if (params.count() == 0) throw std::runtime_error(manifest_path + ": empty manifest");
    return params;
}

}  // namespace adasiam
