#include "shader_cache.hpp"

namespace studio {

ShaderProgram* ShaderCache::lookup(const std::string& key) {
    auto it = programs_.find(key);
    if (it == programs_.end()) {
        return nullptr;
    }
    return it->second;
}

void ShaderCache::invalidate(const std::string& key) {
    programs_.erase(key);
}

void ShaderCache::clear() {
    programs_.clear();
}

}  // namespace studio
