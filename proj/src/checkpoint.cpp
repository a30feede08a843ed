#include "fedsim/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

using nlohmann::json;

void append_vector(std::vector<double>& buf, const Vector& v) {
    buf.insert(buf.end(), v.data(), v.data() + v.size());
}

Vector take_vector(const std::vector<double>& buf, std::size_t& off, int dim) {
    if (off + static_cast<std::size_t>(dim) > buf.size()) {
        throw IoError("checkpoint binary payload shorter than metadata describes");
    }
    Vector v(dim);
    std::copy(buf.begin() + off, buf.begin() + off + dim, v.data());
    off += static_cast<std::size_t>(dim);
    return v;
}

} // namespace

void save_checkpoint(const CheckpointState& st, const std::string& base_path) {
    const bool has_c = st.server.c.size() > 0;
    const bool has_z = !st.clients.empty() && st.clients.front().z.size() > 0;
    const bool has_ci = !st.clients.empty() && st.clients.front().ci.size() > 0;

    std::vector<double> payload;
    append_vector(payload, st.server.x);
    append_vector(payload, st.server.y);
    if (has_c) append_vector(payload, st.server.c);
    for (const auto& cs : st.clients) append_vector(payload, cs.h);
    if (has_z) {
        for (const auto& cs : st.clients) append_vector(payload, cs.z);
    }
    if (has_ci) {
        for (const auto& cs : st.clients) append_vector(payload, cs.ci);
    }
    payload.push_back(st.grad_sum);
    payload.push_back(st.loss_sum);

    json meta;
    meta["version"] = 1;
    meta["algorithm"] = st.algorithm;
    meta["seed"] = st.seed;
    meta["N"] = st.N;
    meta["dim"] = st.dim;
    meta["t"] = st.t;
    meta["has_c"] = has_c;
    meta["has_z"] = has_z;
    meta["has_ci"] = has_ci;
    json a = json::array();
    for (const auto& cs : st.clients) a.push_back(cs.a);
    meta["a"] = a;
    meta["last_selected"] = st.last_selected;
    meta["tau_max"] = st.tau_max;
    meta["tau_sum"] = st.tau_sum;
    meta["cum_down"] = st.cum_down;
    meta["cum_up"] = st.cum_up;
    meta["eval_count"] = st.eval_count;
    meta["last_loss"] = st.last_loss;
    meta["last_grad_norm_sq"] = st.last_grad_norm_sq;
    meta["doubles"] = payload.size();

    const std::string json_path = base_path + ".json";
    const std::string bin_path = base_path + ".bin";
    {
        std::ofstream out(json_path, std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint metadata: " + json_path);
        out << meta.dump(2) << '\n';
        if (!out) throw IoError("failed writing checkpoint metadata: " + json_path);
    }
    {
        std::ofstream out(bin_path, std::ios::trunc | std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint payload: " + bin_path);
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size() * sizeof(double)));
        if (!out) throw IoError("failed writing checkpoint payload: " + bin_path);
    }
}

CheckpointState load_checkpoint(const std::string& base_path) {
    const std::string json_path = base_path + ".json";
    const std::string bin_path = base_path + ".bin";

    std::ifstream meta_in(json_path);
    if (!meta_in) throw IoError("cannot open checkpoint metadata: " + json_path);
    json meta;
    try {
        meta_in >> meta;
    } catch (const json::exception& e) {
        throw IoError("malformed checkpoint metadata " + json_path + ": " + e.what());
    }

    CheckpointState st;
    try {
        if (meta.at("version").get<int>() != 1) {
            throw IoError("unsupported checkpoint version in " + json_path);
        }
        st.algorithm = meta.at("algorithm").get<std::string>();
        st.seed = meta.at("seed").get<std::uint64_t>();
        st.N = meta.at("N").get<int>();
        st.dim = meta.at("dim").get<int>();
        st.t = meta.at("t").get<std::int64_t>();
        st.last_selected = meta.at("last_selected").get<std::vector<std::int64_t>>();
        st.tau_max = meta.at("tau_max").get<std::int64_t>();
        st.tau_sum = meta.at("tau_sum").get<std::int64_t>();
        st.cum_down = meta.at("cum_down").get<std::int64_t>();
        st.cum_up = meta.at("cum_up").get<std::int64_t>();
        st.eval_count = meta.at("eval_count").get<std::int64_t>();
        st.last_loss = meta.at("last_loss").get<double>();
        st.last_grad_norm_sq = meta.at("last_grad_norm_sq").get<double>();
    } catch (const json::exception& e) {
        throw IoError("checkpoint metadata " + json_path + " missing fields: " + e.what());
    }
    if (st.N <= 0 || st.dim <= 0) {
        throw IoError("checkpoint metadata has non-positive N or dim: " + json_path);
    }

    const bool has_c = meta.value("has_c", false);
    const bool has_z = meta.value("has_z", false);
    const bool has_ci = meta.value("has_ci", false);
    const auto a = meta.at("a").get<std::vector<std::int64_t>>();
    if (static_cast<int>(a.size()) != st.N ||
        static_cast<int>(st.last_selected.size()) != st.N) {
        throw IoError("checkpoint client-array length mismatch: " + json_path);
    }

    std::ifstream bin_in(bin_path, std::ios::binary);
    if (!bin_in) throw IoError("cannot open checkpoint payload: " + bin_path);
    const auto expected = meta.at("doubles").get<std::size_t>();
    std::vector<double> payload(expected);
    bin_in.read(reinterpret_cast<char*>(payload.data()),
                static_cast<std::streamsize>(expected * sizeof(double)));
    if (static_cast<std::size_t>(bin_in.gcount()) != expected * sizeof(double)) {
        throw IoError("checkpoint payload truncated: " + bin_path);
    }

    std::size_t off = 0;
    st.server.x = take_vector(payload, off, st.dim);
    st.server.y = take_vector(payload, off, st.dim);
    if (has_c) st.server.c = take_vector(payload, off, st.dim);
    st.server.t = st.t;
    st.clients.resize(st.N);
    for (int i = 0; i < st.N; ++i) {
        st.clients[i].h = take_vector(payload, off, st.dim);
        st.clients[i].a = a[i];
    }
    if (has_z) {
        for (int i = 0; i < st.N; ++i) st.clients[i].z = take_vector(payload, off, st.dim);
    }
    if (has_ci) {
        for (int i = 0; i < st.N; ++i) st.clients[i].ci = take_vector(payload, off, st.dim);
    }
    if (off + 2 != payload.size()) {
        throw IoError("checkpoint payload size mismatch: " + bin_path);
    }
    st.grad_sum = payload[off];
    st.loss_sum = payload[off + 1];
    return st;
}

} // namespace fedsim
