#pragma once

// Local HTTP service for characterization sessions, layout generation and
// typing trials. State lives in flat files under the data directory:
//   sessions/{id}.ndjson  models/{id}.json  layouts/{id}.json  trials/{id}.ndjson

#include <map>
#include <memory>
#include <string>

namespace abkb {

struct ServiceOptions {
    std::string data_dir;
    /// Named phrase files usable as corpus_ref. Names not listed here are
    /// looked up as {data_dir}/corpora/{name}.txt.
    std::map<std::string, std::string> corpora;
};

struct HttpReply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

class Service {
public:
    /// Replays every persisted session and trial found in the data directory.
    explicit Service(ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Transport-independent request handling; the HTTP server forwards here.
    HttpReply handle(const std::string& method, const std::string& path,
                     const std::string& content_type, const std::string& body);

    /// Binds the listener (port 0 picks a free port) and returns the port.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace abkb
