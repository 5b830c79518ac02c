#pragma once
#include <string>
#include <unordered_map>

namespace studio {

class ShaderProgram;

class ShaderCache {
public:
    ShaderProgram* lookup(const std::string& key);
    void invalidate(const std::string& key);
    void clear();

private:
    std::unordered_map<std::string, ShaderProgram*> programs_;
};

}  // namespace studio
