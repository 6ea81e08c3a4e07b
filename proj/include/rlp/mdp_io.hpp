#pragma once

#include "rlp/mdp.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace rlp {

/// Serializes to the on-disk MDP schema: num_states, num_actions, rewards
/// (S x A), transitions (S x A x S), gamma, initial_dist, horizon,
/// noise_sigma.
inline nlohmann::json mdp_to_json(const TabularMdp& m) {
    return nlohmann::json{{"num_states", m.num_states},
                          {"num_actions", m.num_actions},
                          {"rewards", m.rewards},
                          {"transitions", m.transitions},
                          {"gamma", m.gamma},
                          {"initial_dist", m.initial_dist},
                          {"horizon", m.horizon},
                          {"noise_sigma", m.noise_sigma}};
}

inline TabularMdp mdp_from_json(const nlohmann::json& j) {
    TabularMdp m;
    try {
        j.at("num_states").get_to(m.num_states);
        j.at("num_actions").get_to(m.num_actions);
        j.at("rewards").get_to(m.rewards);
        j.at("transitions").get_to(m.transitions);
        j.at("gamma").get_to(m.gamma);
        j.at("initial_dist").get_to(m.initial_dist);
        j.at("horizon").get_to(m.horizon);
        j.at("noise_sigma").get_to(m.noise_sigma);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("mdp document: ") + e.what());
    }
    m.validate();
    return m;
}

/// Loads and validates an MDP file, rejecting with a parse- or field-level
/// error message.
inline TabularMdp load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open MDP file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    try {
        return mdp_from_json(j);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

inline void save_mdp(const TabularMdp& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write MDP file: " + path);
    out << mdp_to_json(m).dump(2) << "\n";
}

} // namespace rlp
