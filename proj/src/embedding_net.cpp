#include "osr/embedding_net.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "osr/errors.hpp"
#include "osr/rng.hpp"
#include "osr/textio.hpp"

namespace osr {

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ValidationError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string to_string(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

namespace {

std::vector<int> layer_dims(const NetConfig& config) {
  std::vector<int> dims;
  dims.push_back(config.input_dim);
  for (int h : config.hidden_dims) dims.push_back(h);
  dims.push_back(config.embed_dim);
  return dims;
}

void check_config(const NetConfig& config) {
  if (config.input_dim < 1)
    throw ValidationError("net config: input_dim must be >= 1");
  if (config.embed_dim < 1)
    throw ValidationError("net config: embed_dim must be >= 1");
  for (int h : config.hidden_dims)
    if (h < 1) throw ValidationError("net config: hidden dims must be >= 1");
}

double activate(Activation a, double z) {
  if (a == Activation::relu) return z > 0.0 ? z : 0.0;
  return std::tanh(z);
}

double activate_deriv(Activation a, double z) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

}  // namespace

NetParams init(const NetConfig& config) {
  check_config(config);
  const std::vector<int> dims = layer_dims(config);

  Rng rng(config.seed);
  NetParams params;
  params.layers.resize(dims.size() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    Layer& layer = params.layers[l];
    layer.weights =
        Matrix(static_cast<std::size_t>(fan_out), static_cast<std::size_t>(fan_in));
    for (double& w : layer.weights.data) w = scale * rng.normal();
    layer.bias.assign(static_cast<std::size_t>(fan_out), 0.0);
  }
  return params;
}

Matrix forward(const NetConfig& config, const NetParams& params, const Matrix& inputs,
               ForwardTape* tape) {
  check_config(config);
  if (params.layers.size() != static_cast<std::size_t>(config.num_layers()))
    throw ValidationError("forward: params layer count does not match config");
  if (inputs.cols != static_cast<std::size_t>(config.input_dim))
    throw ValidationError("forward: input dim " + std::to_string(inputs.cols) +
                          " != config input_dim " + std::to_string(config.input_dim));

  if (tape) {
    tape->layer_inputs.clear();
    tape->pre_activations.clear();
  }

  const std::size_t b = inputs.rows;
  Matrix act = inputs;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Layer& layer = params.layers[l];
    if (layer.weights.cols != act.cols ||
        layer.weights.rows != layer.bias.size())
      throw ValidationError("forward: layer " + std::to_string(l) + " shape mismatch");

    const std::size_t out_dim = layer.weights.rows;
    Matrix z(b, out_dim);
    for (std::size_t i = 0; i < b; ++i) {
      const auto x = act.row(i);
      auto zi = z.row(i);
      for (std::size_t o = 0; o < out_dim; ++o)
        zi[o] = dot(layer.weights.row(o), x) + layer.bias[o];
    }
    if (tape) {
      tape->layer_inputs.push_back(std::move(act));
      tape->pre_activations.push_back(z);
    }
    const bool is_output = (l + 1 == params.layers.size());
    if (is_output) {
      act = std::move(z);
    } else {
      Matrix a(b, out_dim);
      for (std::size_t i = 0; i < z.data.size(); ++i)
        a.data[i] = activate(config.activation, z.data[i]);
      act = std::move(a);
    }
  }
  return act;
}

NetParams backward(const NetConfig& config, const NetParams& params,
                   const ForwardTape& tape, const Matrix& feature_grads) {
  const std::size_t num_layers = params.layers.size();
  if (tape.layer_inputs.size() != num_layers ||
      tape.pre_activations.size() != num_layers)
    throw ValidationError("backward: tape does not match the network layer count");
  if (feature_grads.cols != static_cast<std::size_t>(config.embed_dim) ||
      feature_grads.rows != tape.layer_inputs[0].rows)
    throw ValidationError("backward: feature_grads shape does not match the tape");

  NetParams grads = zeros_like(params);
  const std::size_t b = feature_grads.rows;

  Matrix g = feature_grads;  // dL/dz of the current layer (output layer is linear)
  for (std::size_t l = num_layers; l-- > 0;) {
    const Layer& layer = params.layers[l];
    const Matrix& x = tape.layer_inputs[l];
    if (g.cols != layer.weights.rows || x.cols != layer.weights.cols ||
        x.rows != b)
      throw ValidationError("backward: tape layer " + std::to_string(l) +
                            " shape mismatch");

    Layer& gl = grads.layers[l];
    for (std::size_t i = 0; i < b; ++i) {
      const auto gi = g.row(i);
      const auto xi = x.row(i);
      for (std::size_t o = 0; o < layer.weights.rows; ++o) {
        auto wrow = gl.weights.row(o);
        for (std::size_t k = 0; k < layer.weights.cols; ++k) wrow[k] += gi[o] * xi[k];
        gl.bias[o] += gi[o];
      }
    }

    if (l > 0) {
      Matrix gprev(b, layer.weights.cols);
      for (std::size_t i = 0; i < b; ++i) {
        const auto gi = g.row(i);
        auto gp = gprev.row(i);
        for (std::size_t o = 0; o < layer.weights.rows; ++o) {
          const auto wrow = layer.weights.row(o);
          for (std::size_t k = 0; k < layer.weights.cols; ++k) gp[k] += gi[o] * wrow[k];
        }
      }
      const Matrix& z = tape.pre_activations[l - 1];
      for (std::size_t i = 0; i < gprev.data.size(); ++i)
        gprev.data[i] *= activate_deriv(config.activation, z.data[i]);
      g = std::move(gprev);
    }
  }
  return grads;
}

NetParams zeros_like(const NetParams& params) {
  NetParams out;
  out.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    out.layers[l].weights =
        Matrix(params.layers[l].weights.rows, params.layers[l].weights.cols);
    out.layers[l].bias.assign(params.layers[l].bias.size(), 0.0);
  }
  return out;
}

void accumulate(NetParams& into, const NetParams& delta) {
  if (into.layers.size() != delta.layers.size())
    throw ValidationError("accumulate: layer count mismatch");
  for (std::size_t l = 0; l < into.layers.size(); ++l) {
    Layer& a = into.layers[l];
    const Layer& b = delta.layers[l];
    if (!a.weights.same_shape(b.weights) || a.bias.size() != b.bias.size())
      throw ValidationError("accumulate: layer " + std::to_string(l) + " shape mismatch");
    for (std::size_t i = 0; i < a.weights.data.size(); ++i)
      a.weights.data[i] += b.weights.data[i];
    for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += b.bias[i];
  }
}

// ---------------------------------------------------------------------------
// Checkpoint serialization: whitespace-delimited tagged sections, doubles as
// 17-significant-digit decimals, closed by an explicit "end" marker.
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointTag = "osr-checkpoint";
constexpr int kCheckpointVersion = 1;

void append_params(std::string& out, const char* tag, const NetParams& params) {
  out += tag;
  out += "\nlayers ";
  out += std::to_string(params.layers.size());
  out += '\n';
  for (const Layer& layer : params.layers) {
    out += "layer " + std::to_string(layer.weights.rows) + ' ' +
           std::to_string(layer.weights.cols) + "\nw";
    for (double v : layer.weights.data) {
      out += ' ';
      out += format_g17(v);
    }
    out += "\nb";
    for (double v : layer.bias) {
      out += ' ';
      out += format_g17(v);
    }
    out += '\n';
  }
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string next() {
    std::string tok;
    if (!(in_ >> tok))
      throw CheckpointIntegrityError("checkpoint truncated: unexpected end of file");
    return tok;
  }

  void expect(const std::string& literal) {
    const std::string tok = next();
    if (tok != literal)
      throw CheckpointIntegrityError("checkpoint corrupt: expected '" + literal +
                                     "', found '" + tok + "'");
  }

  long long read_int() {
    const std::string tok = next();
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw CheckpointIntegrityError("checkpoint corrupt: expected integer, found '" +
                                     tok + "'");
    }
  }

  std::uint64_t read_u64() {
    const std::string tok = next();
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw CheckpointIntegrityError(
          "checkpoint corrupt: expected unsigned integer, found '" + tok + "'");
    }
  }

  double read_double() {
    const std::string tok = next();
    try {
      std::size_t pos = 0;
      const double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw CheckpointIntegrityError("checkpoint corrupt: expected number, found '" +
                                     tok + "'");
    }
  }

 private:
  std::istream& in_;
};

NetParams read_params(TokenReader& r) {
  r.expect("layers");
  const long long n = r.read_int();
  if (n < 0 || n > 1024)
    throw CheckpointIntegrityError("checkpoint corrupt: implausible layer count");
  NetParams params;
  params.layers.resize(static_cast<std::size_t>(n));
  for (Layer& layer : params.layers) {
    r.expect("layer");
    const long long rows = r.read_int();
    const long long cols = r.read_int();
    if (rows < 1 || cols < 1 || rows * cols > (1ll << 32))
      throw CheckpointIntegrityError("checkpoint corrupt: implausible layer shape");
    layer.weights =
        Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    r.expect("w");
    for (double& v : layer.weights.data) v = r.read_double();
    layer.bias.resize(static_cast<std::size_t>(rows));
    r.expect("b");
    for (double& v : layer.bias) v = r.read_double();
  }
  return params;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::string out;
  out.reserve(1 << 16);
  out += kCheckpointTag;
  out += ' ';
  out += std::to_string(kCheckpointVersion);
  out += '\n';

  out += "net_config\ninput_dim " + std::to_string(ckpt.net_config.input_dim);
  out += "\nhidden " + std::to_string(ckpt.net_config.hidden_dims.size());
  for (int h : ckpt.net_config.hidden_dims) out += ' ' + std::to_string(h);
  out += "\nembed_dim " + std::to_string(ckpt.net_config.embed_dim);
  out += "\nactivation " + to_string(ckpt.net_config.activation);
  out += "\nseed " + std::to_string(ckpt.net_config.seed);
  out += '\n';

  out += "centers\nnum_classes " + std::to_string(ckpt.centers.num_classes);
  out += "\nembed_dim " + std::to_string(ckpt.centers.embed_dim);
  out += "\nradius " + format_g17(ckpt.centers.radius);
  out += "\nvalues";
  for (double v : ckpt.centers.centers.data) out += ' ' + format_g17(v);
  out += '\n';

  out += "margins\nnum_classes " + std::to_string(ckpt.margins.num_classes());
  out += "\nm_min " + format_g17(ckpt.margins.m_min);
  out += "\nm_max " + format_g17(ckpt.margins.m_max);
  out += "\ncounts";
  for (std::int64_t c : ckpt.margins.class_counts) out += ' ' + std::to_string(c);
  out += "\nvalues";
  for (double v : ckpt.margins.per_class_margin) out += ' ' + format_g17(v);
  out += '\n';

  append_params(out, "params", ckpt.net_params);
  append_params(out, "rms_state", ckpt.rms_state);

  out += "meta\nepoch " + std::to_string(ckpt.meta.epoch);
  out += "\nseed " + std::to_string(ckpt.meta.seed);
  out += "\nlambda_inter " + format_g17(ckpt.meta.lambda_inter);
  out += "\nlambda_bg " + format_g17(ckpt.meta.lambda_bg);
  out += "\nlearning_rate " + format_g17(ckpt.meta.learning_rate);
  out += "\nrms_decay " + format_g17(ckpt.meta.rms_decay);
  out += "\nrms_epsilon " + format_g17(ckpt.meta.rms_epsilon);
  out += "\nsquare_margins ";
  out += ckpt.meta.square_margins ? '1' : '0';
  out += "\nend\n";

  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path.string());
  TokenReader r(in);

  {
    std::string tag;
    if (!(in >> tag)) throw CheckpointIntegrityError("checkpoint file is empty");
    if (tag != kCheckpointTag)
      throw CheckpointVersionError("not a checkpoint file (tag '" + tag + "')");
    std::string version;
    if (!(in >> version))
      throw CheckpointIntegrityError("checkpoint truncated before version");
    if (version != std::to_string(kCheckpointVersion))
      throw CheckpointVersionError("unsupported checkpoint version '" + version +
                                   "' (expected " +
                                   std::to_string(kCheckpointVersion) + ")");
  }

  Checkpoint ckpt;

  r.expect("net_config");
  r.expect("input_dim");
  ckpt.net_config.input_dim = static_cast<int>(r.read_int());
  r.expect("hidden");
  const long long nh = r.read_int();
  if (nh < 0 || nh > 1024)
    throw CheckpointIntegrityError("checkpoint corrupt: implausible hidden count");
  ckpt.net_config.hidden_dims.resize(static_cast<std::size_t>(nh));
  for (int& h : ckpt.net_config.hidden_dims) h = static_cast<int>(r.read_int());
  r.expect("embed_dim");
  ckpt.net_config.embed_dim = static_cast<int>(r.read_int());
  r.expect("activation");
  try {
    ckpt.net_config.activation = activation_from_string(r.next());
  } catch (const ValidationError& e) {
    throw CheckpointIntegrityError(std::string("checkpoint corrupt: ") + e.what());
  }
  r.expect("seed");
  ckpt.net_config.seed = r.read_u64();

  r.expect("centers");
  r.expect("num_classes");
  ckpt.centers.num_classes = static_cast<int>(r.read_int());
  r.expect("embed_dim");
  ckpt.centers.embed_dim = static_cast<int>(r.read_int());
  if (ckpt.centers.num_classes < 2 || ckpt.centers.embed_dim < 1)
    throw CheckpointIntegrityError("checkpoint corrupt: implausible centers shape");
  r.expect("radius");
  ckpt.centers.radius = r.read_double();
  r.expect("values");
  ckpt.centers.centers = Matrix(static_cast<std::size_t>(ckpt.centers.num_classes),
                                static_cast<std::size_t>(ckpt.centers.embed_dim));
  for (double& v : ckpt.centers.centers.data) v = r.read_double();

  r.expect("margins");
  r.expect("num_classes");
  const long long mc = r.read_int();
  if (mc < 1 || mc > (1ll << 20))
    throw CheckpointIntegrityError("checkpoint corrupt: implausible margin count");
  r.expect("m_min");
  ckpt.margins.m_min = r.read_double();
  r.expect("m_max");
  ckpt.margins.m_max = r.read_double();
  r.expect("counts");
  ckpt.margins.class_counts.resize(static_cast<std::size_t>(mc));
  for (std::int64_t& c : ckpt.margins.class_counts) c = r.read_int();
  r.expect("values");
  ckpt.margins.per_class_margin.resize(static_cast<std::size_t>(mc));
  for (double& v : ckpt.margins.per_class_margin) v = r.read_double();

  r.expect("params");
  ckpt.net_params = read_params(r);
  r.expect("rms_state");
  ckpt.rms_state = read_params(r);

  r.expect("meta");
  r.expect("epoch");
  ckpt.meta.epoch = static_cast<int>(r.read_int());
  r.expect("seed");
  ckpt.meta.seed = r.read_u64();
  r.expect("lambda_inter");
  ckpt.meta.lambda_inter = r.read_double();
  r.expect("lambda_bg");
  ckpt.meta.lambda_bg = r.read_double();
  r.expect("learning_rate");
  ckpt.meta.learning_rate = r.read_double();
  r.expect("rms_decay");
  ckpt.meta.rms_decay = r.read_double();
  r.expect("rms_epsilon");
  ckpt.meta.rms_epsilon = r.read_double();
  r.expect("square_margins");
  ckpt.meta.square_margins = r.read_int() != 0;
  r.expect("end");

  return ckpt;
}

}  // namespace osr
