use std::path::Path;

use anyhow::{Context, Result};
use qmlsec_core::noise::DeviceProfile;
use qmlsec_core::simcore::Circuit;
use serde::de::DeserializeOwned;

use crate::output::read_text;

/// Settings from a JSON config file, or defaults when none is given.
/// Keys missing from the file keep their defaults.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => serde_json::from_str(&read_text(p)?)
            .with_context(|| format!("parsing config {}", p.display())),
    }
}

/// Copies every `Some` flag over the matching settings field.
macro_rules! overlay {
    ($settings:expr, $args:expr; $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $args.$field.clone() {
            $settings.$field = v;
        })+
    };
}
pub(crate) use overlay;

/// A device profile JSON file, or the name of a shipped profile.
pub fn device(spec: &str) -> Result<DeviceProfile> {
    let p = Path::new(spec);
    if p.is_file() {
        let d = DeviceProfile::from_json(&read_text(p)?)
            .with_context(|| format!("parsing device {}", p.display()))?;
        d.validate()?;
        return Ok(d);
    }
    DeviceProfile::builtin(spec).with_context(|| {
        format!(
            "`{spec}` is neither a device file nor one of {:?}",
            qmlsec_core::noise::BUILTIN_PROFILES
        )
    })
}

pub fn circuit(path: &Path) -> Result<Circuit> {
    Circuit::parse(&read_text(path)?).with_context(|| format!("parsing circuit {}", path.display()))
}
