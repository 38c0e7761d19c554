#include <cstring>
#include <fstream>
#include <map>

#include "emoda/model.hpp"

namespace emoda::model {

namespace {

constexpr std::uint32_t kMagic = 0x454d4348; // "EMCH"
constexpr std::uint32_t kVersion = 1;

template <class V>
void write_pod(std::ostream& out, const V& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V read_pod(std::istream& in, const char* what) {
    V v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(V))) {
        throw ParseError(std::string("checkpoint truncated while reading ") + what);
    }
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    auto n = read_pod<std::uint32_t>(in, "string length");
    std::string s(n, '\0');
    if (n && !in.read(s.data(), n)) throw ParseError("checkpoint truncated inside a string");
    return s;
}

struct StoredTensor {
    std::vector<std::size_t> shape;
    std::vector<char> bytes;
    std::uint8_t dtype = 0;
};

} // namespace

template <class T>
void save_checkpoint(const std::string& path, const Model<T>& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);

    write_pod(out, kMagic);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint8_t>(model.variant));
    write_pod(out, static_cast<std::uint8_t>(model.embedding_trainable ? 1 : 0));
    write_pod(out, static_cast<std::uint16_t>(model.emotion_classes));
    write_pod(out, static_cast<std::uint64_t>(model.dims.embed_dim));
    write_pod(out, static_cast<std::uint64_t>(model.dims.hidden));
    write_pod(out, static_cast<std::uint64_t>(model.dims.head_hidden));

    auto params = model.named_params(true);
    write_pod(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& np : params) {
        write_string(out, np.name);
        write_pod(out, static_cast<std::uint8_t>(sizeof(T)));
        write_pod(out, static_cast<std::uint8_t>(np.tensor.ndim()));
        for (std::size_t d : np.tensor.shape()) {
            write_pod(out, static_cast<std::uint64_t>(d));
        }
        out.write(reinterpret_cast<const char*>(np.tensor.data()),
                  static_cast<std::streamsize>(np.tensor.size() * sizeof(T)));
    }
    if (!out) throw IoError("failed while writing checkpoint " + path);
}

template <class T>
Model<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);

    if (read_pod<std::uint32_t>(in, "magic") != kMagic) {
        throw ParseError(path + " is not a checkpoint file");
    }
    if (read_pod<std::uint32_t>(in, "version") != kVersion) {
        throw ParseError("unsupported checkpoint version in " + path);
    }
    Model<T> m;
    m.variant = static_cast<ModelVariant>(read_pod<std::uint8_t>(in, "variant"));
    m.embedding_trainable = read_pod<std::uint8_t>(in, "flags") != 0;
    m.emotion_classes = read_pod<std::uint16_t>(in, "emotion classes");
    m.dims.embed_dim = read_pod<std::uint64_t>(in, "embed dim");
    m.dims.hidden = read_pod<std::uint64_t>(in, "hidden dim");
    m.dims.head_hidden = read_pod<std::uint64_t>(in, "head dim");

    auto count = read_pod<std::uint32_t>(in, "tensor count");
    std::map<std::string, StoredTensor> stored;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = read_string(in);
        StoredTensor st;
        st.dtype = read_pod<std::uint8_t>(in, "dtype");
        if (st.dtype != sizeof(T)) {
            throw ConfigError("checkpoint " + path + " stores " +
                              std::to_string(st.dtype * 8) + "-bit tensors, expected " +
                              std::to_string(sizeof(T) * 8) + "-bit");
        }
        auto ndim = read_pod<std::uint8_t>(in, "rank");
        std::size_t n = 1;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            auto dim = read_pod<std::uint64_t>(in, "dimension");
            st.shape.push_back(static_cast<std::size_t>(dim));
            n *= static_cast<std::size_t>(dim);
        }
        st.bytes.resize(n * sizeof(T));
        if (!in.read(st.bytes.data(), static_cast<std::streamsize>(st.bytes.size()))) {
            throw ParseError("checkpoint truncated inside tensor " + name);
        }
        stored.emplace(std::move(name), std::move(st));
    }

    auto take = [&](const std::string& name, bool requires_grad) {
        auto it = stored.find(name);
        if (it == stored.end()) {
            throw ParseError("checkpoint " + path + " is missing tensor " + name);
        }
        const StoredTensor& st = it->second;
        std::vector<long long> dims(st.shape.begin(), st.shape.end());
        std::vector<T> values(st.bytes.size() / sizeof(T));
        std::memcpy(values.data(), st.bytes.data(), st.bytes.size());
        return ad::Tensor<T>::from_values(dims, std::move(values), requires_grad);
    };

    m.embedding = take("embedding", m.embedding_trainable);
    m.lstm.Wi = take("lstm.Wi", true);
    m.lstm.Wf = take("lstm.Wf", true);
    m.lstm.Wc = take("lstm.Wc", true);
    m.lstm.Wo = take("lstm.Wo", true);
    m.lstm.Ui = take("lstm.Ui", true);
    m.lstm.Uf = take("lstm.Uf", true);
    m.lstm.Uc = take("lstm.Uc", true);
    m.lstm.Uo = take("lstm.Uo", true);
    m.lstm.bi = take("lstm.bi", true);
    m.lstm.bf = take("lstm.bf", true);
    m.lstm.bc = take("lstm.bc", true);
    m.lstm.bo = take("lstm.bo", true);
    m.fnd1 = {take("fnd.dense1.W", true), take("fnd.dense1.b", true)};
    m.fnd2 = {take("fnd.dense2.W", true), take("fnd.dense2.b", true)};
    if (uses_emotion(m.variant)) {
        m.emo1 = Dense<T>{take("emo.dense1.W", true), take("emo.dense1.b", true)};
        m.emo2 = Dense<T>{take("emo.dense2.W", true), take("emo.dense2.b", true)};
    }
    if (uses_discriminator(m.variant)) {
        m.disc1 = Dense<T>{take("disc.dense1.W", true), take("disc.dense1.b", true)};
        m.disc2 = Dense<T>{take("disc.dense2.W", true), take("disc.dense2.b", true)};
    }
    return m;
}

template void save_checkpoint<float>(const std::string&, const Model<float>&);
template void save_checkpoint<double>(const std::string&, const Model<double>&);
template Model<float> load_checkpoint<float>(const std::string&);
template Model<double> load_checkpoint<double>(const std::string&);

} // namespace emoda::model
