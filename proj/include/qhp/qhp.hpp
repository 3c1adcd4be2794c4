#pragma once

#include "qhp/core.hpp"
#include "qhp/hpm.hpp"
#include "qhp/hpg.hpp"
#include "qhp/pdo.hpp"
#include "qhp/segment.hpp"
#include "qhp/episodes.hpp"
#include "qhp/gradcheck.hpp"
#include "qhp/cli.hpp"
