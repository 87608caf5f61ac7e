// SPDX-License-Identifier: Apache-2.0

pub mod data;
pub mod experiments;
pub mod features;
pub mod labels;
pub mod learn;
pub mod metrics;
pub mod protocols;
