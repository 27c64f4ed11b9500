//! Python module `cgolab`: the K_σ kernels, the symbols p and p_ν, and the
//! CLI subcommands run in memory.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cgolab_cli::commands::{exit_code, run, Command};
use cgolab_cli::config::Config;
use cgolab_core::kernels::{eval_k_sigma, eval_k_sigma_quadrature, KernelError};
use cgolab_core::symbols::{eval_p, eval_p_nu, NuVector};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kernel_err(e: KernelError) -> PyErr {
    match e {
        KernelError::Quad(_) => PyRuntimeError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn command(name: &str) -> Result<Command, String> {
    Command::ALL
        .into_iter()
        .find(|c| c.id() == name)
        .ok_or_else(|| format!("unknown command '{name}'"))
}

fn parse_config(toml: Option<&str>) -> Result<Config, String> {
    let cfg = match toml {
        Some(t) => Config::from_toml(t).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Exit code and the files a run would write, without touching disk.
fn run_in_memory(name: &str, toml: Option<&str>) -> Result<(i32, BTreeMap<String, String>), String> {
    let cmd = command(name)?;
    let cfg = parse_config(toml)?;
    let result = run(cmd, &cfg);
    let code = exit_code(&result);
    let files = match result {
        Ok(out) => out.files().into_iter().collect(),
        Err(_) => BTreeMap::new(),
    };
    Ok((code, files))
}

/// Closed-form K_σ(x) as (re, im).
#[pyfunction]
fn kernel(sigma: f64, x: f64) -> PyResult<(f64, f64)> {
    let s = eval_k_sigma(sigma, x).map_err(kernel_err)?;
    Ok((s.value.re, s.value.im))
}

/// K_σ(x) by quadrature of its defining integral as (re, im, error estimate).
#[pyfunction]
#[pyo3(signature = (sigma, x, tol=1e-9))]
fn kernel_quadrature(sigma: f64, x: f64, tol: f64) -> PyResult<(f64, f64, f64)> {
    let s = eval_k_sigma_quadrature(sigma, x, tol).map_err(kernel_err)?;
    Ok((s.value.re, s.value.im, s.err_est))
}

/// p(τ, ξ) = τ − |ξ|² + iξₙ, or p_ν(τ, ξ) = −τ − |ξ|² + 2iν·ξ when ν is given.
#[pyfunction]
#[pyo3(signature = (tau, xi, nu=None))]
fn symbol(tau: f64, xi: Vec<f64>, nu: Option<Vec<f64>>) -> PyResult<(f64, f64)> {
    if xi.is_empty() || xi.len() > 3 {
        return Err(value_err("xi must have 1 to 3 components"));
    }
    let p = match nu {
        None => eval_p(tau, &xi),
        Some(v) => {
            if v.len() != xi.len() {
                return Err(value_err("nu and xi differ in dimension"));
            }
            eval_p_nu(tau, &xi, &NuVector::new(v).map_err(value_err)?)
        }
    };
    Ok((p.re, p.im))
}

/// The default configuration as TOML.
#[pyfunction]
fn default_config() -> String {
    Config::default().to_toml()
}

/// Hash embedded in reports for a configuration (None means the default).
#[pyfunction]
#[pyo3(signature = (toml=None))]
fn config_hash(toml: Option<&str>) -> PyResult<String> {
    Ok(parse_config(toml).map_err(value_err)?.hash())
}

/// Run a subcommand in memory; returns (exit code, {file name: contents}).
#[pyfunction]
#[pyo3(signature = (command, toml=None))]
fn run_command(py: Python<'_>, command: &str, toml: Option<&str>) -> PyResult<(i32, BTreeMap<String, String>)> {
    let (command, toml) = (command.to_string(), toml.map(str::to_string));
    py.allow_threads(move || run_in_memory(&command, toml.as_deref())).map_err(value_err)
}

#[pymodule]
fn cgolab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("COMMANDS", Command::ALL.iter().map(|c| c.id()).collect::<Vec<_>>())?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(symbol, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commands_resolve_by_id() {
        for c in Command::ALL {
            assert_eq!(command(c.id()).unwrap(), c);
        }
        assert!(command("nope").is_err());
    }

    #[test]
    fn bad_config_is_an_error_with_path() {
        let e = parse_config(Some("[cgo_build]\ntol = -1.0\n")).unwrap_err();
        assert!(e.contains("cgo_build.tol"), "{e}");
    }

    #[test]
    fn in_memory_run_matches_cli_files() {
        let (code, files) = run_in_memory("forward-evolve", None).unwrap();
        assert_eq!(code, 0);
        let direct = run(Command::ForwardEvolve, &Config::default()).unwrap().files();
        assert_eq!(files.len(), direct.len());
        for (n, c) in direct {
            assert_eq!(files[&n], c);
        }
    }
}
