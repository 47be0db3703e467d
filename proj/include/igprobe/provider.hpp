#pragma once
// Client for external gradient providers: a child process speaking
// newline-delimited JSON over stdio.
//
//   provider -> client  {"type":"hello","classes":[...],"input_shape":[H,W,3]}
//   client -> provider  {"type":"grad","id":n,"image":"<base64 f32le HWC>","label":k}
//   provider -> client  {"type":"grad_result","id":n,"loss":f,"logits":[...],"grad":"<base64 f32le HWC>"}
//                   or  {"type":"error","id":n,"message":"..."}
//
// Floats on the wire are IEEE-754 binary32, little-endian, row-major H x W x C.

#include <bit>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sodium.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "igprobe/model.hpp"

namespace igprobe {

class ProviderError : public Error {
public:
    using Error::Error;
};

inline constexpr double kProviderLossTolerance = 1e-4;

struct ProviderSpec {
    std::string command;   // run through /bin/sh -c
    Shape input_shape;     // expected; empty accepts whatever the hello announces
    std::vector<std::string> class_names;  // expected; empty accepts the hello's list
    double timeout_seconds = 30.0;
};

// ---------------------------------------------------------------------------
// Wire encoding

inline std::string encode_f32le(std::span<const double> values) {
    std::vector<unsigned char> raw(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
        for (int b = 0; b < 4; ++b) raw[i * 4 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    std::string out(sodium_base64_encoded_len(raw.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(out.data(), out.size(), raw.data(), raw.size(), sodium_base64_VARIANT_ORIGINAL);
    out.resize(std::strlen(out.c_str()));
    return out;
}

/// Decodes base64 f32le into doubles (exact widening).
inline std::vector<double> decode_f32le(const std::string& b64) {
    std::vector<unsigned char> raw(b64.size() / 4 * 3 + 3);
    std::size_t len = 0;
    if (sodium_base642bin(raw.data(), raw.size(), b64.data(), b64.size(), nullptr, &len, nullptr,
                          sodium_base64_VARIANT_ORIGINAL) != 0)
        throw ProviderError("invalid base64 payload");
    if (len % 4 != 0) throw ProviderError("payload length " + std::to_string(len) + " is not a multiple of 4");
    std::vector<double> out(len / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= std::uint32_t(raw[i * 4 + b]) << (8 * b);
        out[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Child process

class ProviderProcess {
public:
    explicit ProviderProcess(const ProviderSpec& spec) : spec_(spec) {
        if (spec.command.empty()) throw ProviderError("provider command is empty");
        if (sodium_init() < 0) throw ProviderError("libsodium initialisation failed");
        int in_pipe[2], out_pipe[2], err_pipe[2];
        if (pipe(in_pipe) || pipe(out_pipe) || pipe(err_pipe)) throw ProviderError("pipe: " + std::string(std::strerror(errno)));
        pid_ = fork();
        if (pid_ < 0) throw ProviderError("fork: " + std::string(std::strerror(errno)));
        if (pid_ == 0) {
            dup2(in_pipe[0], STDIN_FILENO);
            dup2(out_pipe[1], STDOUT_FILENO);
            dup2(err_pipe[1], STDERR_FILENO);
            for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) close(fd);
            execl("/bin/sh", "sh", "-c", spec.command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(in_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[1]);
        to_child_ = in_pipe[1];
        from_child_ = out_pipe[0];
        err_child_ = err_pipe[0];
        fcntl(err_child_, F_SETFL, fcntl(err_child_, F_GETFL) | O_NONBLOCK);
        std::signal(SIGPIPE, SIG_IGN);
        handshake();
    }

    ProviderProcess(const ProviderProcess&) = delete;
    ProviderProcess& operator=(const ProviderProcess&) = delete;

    ~ProviderProcess() {
        if (to_child_ >= 0) close(to_child_);
        if (pid_ > 0) {
            // Closing stdin asks the provider to exit; escalate if it lingers.
            for (int i = 0; i < 50; ++i) {
                if (waitpid(pid_, nullptr, WNOHANG) == pid_) {
                    pid_ = -1;
                    break;
                }
                usleep(10000);
            }
            if (pid_ > 0) {
                kill(pid_, SIGKILL);
                waitpid(pid_, nullptr, 0);
            }
        }
        if (from_child_ >= 0) close(from_child_);
        if (err_child_ >= 0) close(err_child_);
    }

    const std::vector<std::string>& classes() const { return classes_; }
    const Shape& input_shape() const { return input_shape_; }

    /// One grad request/response round trip. Serialised by an internal mutex.
    LossGrad request(const Tensor& image, std::size_t label) {
        std::lock_guard lock(mu_);
        if (image.shape() != input_shape_)
            throw ProviderError("provider expects image " + shape_str(input_shape_) + ", got " + shape_str(image.shape()));
        if (label >= classes_.size()) throw ProviderError("label " + std::to_string(label) + " out of range");
        const std::uint64_t id = next_id_++;
        nlohmann::json req = {{"type", "grad"}, {"id", id}, {"image", encode_f32le(image.data())}, {"label", label}};
        send_line(req.dump());

        const auto resp = parse(read_line());
        const auto type = resp.value("type", std::string{});
        if (type == "error")
            throw ProviderError("provider error for request " + std::to_string(id) + ": " +
                                resp.value("message", std::string("(no message)")));
        if (type != "grad_result") throw ProviderError("schema error: expected grad_result, got '" + type + "'");
        try {
            if (resp.at("id").get<std::uint64_t>() != id)
                throw ProviderError("schema error: response id " + resp.at("id").dump() + " for request " + std::to_string(id));
            LossGrad out;
            out.loss = resp.at("loss").get<double>();
            const auto logits = resp.at("logits").get<std::vector<double>>();
            if (logits.size() != classes_.size())
                throw ProviderError("schema error: logits length expected " + std::to_string(classes_.size()) +
                                    ", got " + std::to_string(logits.size()));
            out.logits = Tensor({logits.size()}, logits);
            auto grad = decode_f32le(resp.at("grad").get<std::string>());
            const std::size_t want = shape_numel(input_shape_);
            if (grad.size() != want)
                throw ProviderError("schema error: gradient length expected " + std::to_string(want) + ", got " +
                                    std::to_string(grad.size()));
            out.grad = Tensor(input_shape_, std::move(grad));
            const double expect = loss_ce(out.logits, label);
            if (!(std::abs(out.loss - expect) <= kProviderLossTolerance))
                throw ProviderError("consistency error: provider loss " + std::to_string(out.loss) +
                                    " but -log softmax(logits)[label] = " + std::to_string(expect));
            return out;
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("schema error: ") + e.what());
        } catch (const DimensionError& e) {
            throw ProviderError(std::string("schema error: ") + e.what());
        } catch (const ProviderError&) {
            throw;
        } catch (const Error& e) {
            throw ProviderError(std::string("schema error: ") + e.what());
        }
    }

    /// Everything the child has written to stderr so far.
    std::string stderr_text() {
        drain_stderr();
        return stderr_;
    }

private:
    void handshake() {
        const auto hello = parse(read_line());
        if (hello.value("type", std::string{}) != "hello")
            throw ProviderError("handshake: expected hello, got " + hello.dump());
        try {
            classes_ = hello.at("classes").get<std::vector<std::string>>();
            input_shape_ = hello.at("input_shape").get<Shape>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("handshake schema error: ") + e.what());
        }
        if (classes_.empty()) throw ProviderError("handshake: provider announced no classes");
        if (input_shape_.size() != 3 || input_shape_[2] != 3 || input_shape_[0] == 0 || input_shape_[1] == 0)
            throw ProviderError("handshake: input_shape must be [H,W,3], got " + shape_str(input_shape_));
        if (!spec_.input_shape.empty() && spec_.input_shape != input_shape_)
            throw ProviderError("handshake: provider input " + shape_str(input_shape_) + " != expected " +
                                shape_str(spec_.input_shape));
        if (!spec_.class_names.empty() && spec_.class_names != classes_)
            throw ProviderError("handshake: provider classes differ from the expected class list");
    }

    nlohmann::json parse(const std::string& line) {
        try {
            return nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("schema error: invalid JSON from provider: ") + e.what());
        }
    }

    void send_line(const std::string& line) {
        std::string buf = line + '\n';
        std::size_t off = 0;
        while (off < buf.size()) {
            const ssize_t n = write(to_child_, buf.data() + off, buf.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProviderError("provider closed its input: " + std::string(std::strerror(errno)) + with_stderr());
            }
            off += static_cast<std::size_t>(n);
        }
    }

    void drain_stderr() {
        char tmp[4096];
        ssize_t n;
        while ((n = read(err_child_, tmp, sizeof tmp)) > 0) stderr_.append(tmp, static_cast<std::size_t>(n));
    }

    std::string with_stderr() {
        drain_stderr();
        return stderr_.empty() ? std::string{} : "\nprovider stderr:\n" + stderr_;
    }

    std::string read_line() {
        using clock = std::chrono::steady_clock;
        const auto deadline = clock::now() + std::chrono::duration<double>(spec_.timeout_seconds);
        for (;;) {
            if (auto pos = pending_.find('\n'); pos != std::string::npos) {
                std::string line = pending_.substr(0, pos);
                pending_.erase(0, pos + 1);
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
            if (left <= 0) throw ProviderError("timed out waiting for provider" + with_stderr());
            pollfd fds[2] = {{from_child_, POLLIN, 0}, {err_child_, POLLIN, 0}};
            const int rc = poll(fds, 2, static_cast<int>(std::min<long long>(left, 1000)));
            if (rc < 0 && errno != EINTR) throw ProviderError("poll: " + std::string(std::strerror(errno)));
            if (fds[1].revents) drain_stderr();
            if (fds[0].revents & (POLLIN | POLLHUP)) {
                char tmp[65536];
                const ssize_t n = read(from_child_, tmp, sizeof tmp);
                if (n == 0) {
                    int status = 0;
                    std::string how = "provider exited";
                    if (waitpid(pid_, &status, 0) == pid_) {
                        pid_ = -1;
                        if (WIFEXITED(status)) how += " with status " + std::to_string(WEXITSTATUS(status));
                        else if (WIFSIGNALED(status)) how += " on signal " + std::to_string(WTERMSIG(status));
                    }
                    throw ProviderError(how + with_stderr());
                }
                if (n > 0) pending_.append(tmp, static_cast<std::size_t>(n));
            }
        }
    }

    ProviderSpec spec_;
    pid_t pid_ = -1;
    int to_child_ = -1, from_child_ = -1, err_child_ = -1;
    std::string pending_, stderr_;
    std::vector<std::string> classes_;
    Shape input_shape_;
    std::uint64_t next_id_ = 0;
    std::mutex mu_;
};

struct ProviderConnection {
    std::shared_ptr<ProviderProcess> process;
    GradFn grad;
    LogitFn logits;  // classification through a grad request at label 0
};

/// Spawns the provider, completes the hello handshake, and wraps it as a GradFn.
inline ProviderConnection provider_connect(const ProviderSpec& spec) {
    auto proc = std::make_shared<ProviderProcess>(spec);
    ProviderConnection c;
    c.process = proc;
    c.grad = [proc](const Tensor& x, std::size_t k) { return proc->request(x, k); };
    c.logits = [proc](const Tensor& x) { return proc->request(x, 0).logits; };
    return c;
}

}  // namespace igprobe
