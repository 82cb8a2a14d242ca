import os
from typing import Dict


# Translation tables
_TRANSLATIONS: Dict[str, Dict[str, str]] = {
    "en_US": {
        # main.py
        "csaeo_starting": "CSA EO semantic link simulator",
        "command": "Command",
        "config_file": "Config file",
        "builtin_defaults": "built-in defaults",
        "master_seed": "Master seed",
        "worker_jobs": "Worker processes",
        "output_directory": "Output directory",
        "overwrite": "Overwrite existing artifacts",
        "enabled": "enabled",
        "disabled": "disabled",
        "command_finished": "{command} finished in {seconds:.1f} s",
        "artifact_exists": "Artifact already exists: {path} (pass --overwrite to replace it)",
        "config_error": "Configuration error: {error}",
        "runtime_error": "Run failed: {error}",
        "unexpected_error": "Unexpected error: {error}",
        # utils/config.py
        "config_not_found": "Config file not found: {path}",
        "config_parse_error": "Cannot parse {path} at line {line}, column {column}: {error}",
        "config_invalid": "Invalid configuration in {path}: {errors}",
        # harness
        "loading_dataset": "Loading {source} dataset",
        "dataset_ready": "Dataset: {count} images of {shape} in {classes} classes",
        "wrote_artifact": "Wrote {path}",
        "training_codec": "Training codec with K_q={k_q}",
        "train_summary": "K_q={k_q}: train Top-1 {train:.2%}, test Top-1 {test:.2%}, nearest-mean oracle {oracle:.2%}",
        "checkpoint_missing": "No checkpoint for K_q={k_q} at {path}; run the train command first",
        "sweep_points": "Running {count} sweep points on {jobs} worker(s)",
        "sweep_point_done": "[{done}/{total}] {run_id}: top1={top1:.4f}",
        "ser_point": "Es/N0={snr:g} dB: 16PSK {psk:.3e}, 16APSK {apsk:.3e}",
        "csa_running": "Comparing CSA and non-CSA over {seeds} seed(s) at PSNR {psnr}",
        "csa_mean": "Mean Top-1: CSA {csa:.2f}%, non-CSA {non_csa:.2f}%",
        "probe_kind": "{kind}: E|H|^2={power:.4f}, K estimate={k_estimate:.3f}",
        "link_budget": "{link}: range {distance_km:.1f} km, loss {loss_db:.2f} dB, received SNR {snr_db:.2f} dB",
        "confusion_accuracy": "Top-1 {accuracy:.2f}% at {point}",
    },
    "zh_CN": {
        # main.py
        "csaeo_starting": "CSA 对地观测语义链路仿真器",
        "command": "命令",
        "config_file": "配置文件",
        "builtin_defaults": "内置默认值",
        "master_seed": "主随机种子",
        "worker_jobs": "工作进程数",
        "output_directory": "输出目录",
        "overwrite": "覆盖已有产物",
        "enabled": "开启",
        "disabled": "关闭",
        "command_finished": "{command} 完成，用时 {seconds:.1f} 秒",
        "artifact_exists": "产物已存在: {path}（使用 --overwrite 覆盖）",
        "config_error": "配置错误: {error}",
        "runtime_error": "运行失败: {error}",
        "unexpected_error": "未知错误: {error}",
        # utils/config.py
        "config_not_found": "未找到配置文件: {path}",
        "config_parse_error": "无法解析 {path}，第 {line} 行第 {column} 列: {error}",
        "config_invalid": "{path} 中的配置无效: {errors}",
        # harness
        "loading_dataset": "正在加载 {source} 数据集",
        "dataset_ready": "数据集: {count} 张 {shape} 图像，{classes} 个类别",
        "wrote_artifact": "已写入 {path}",
        "training_codec": "正在训练 K_q={k_q} 的编解码器",
        "train_summary": "K_q={k_q}: 训练 Top-1 {train:.2%}，测试 Top-1 {test:.2%}，最近均值基准 {oracle:.2%}",
        "checkpoint_missing": "K_q={k_q} 的检查点不存在: {path}；请先运行 train 命令",
        "sweep_points": "在 {jobs} 个进程上运行 {count} 个扫描点",
        "sweep_point_done": "[{done}/{total}] {run_id}: top1={top1:.4f}",
        "ser_point": "Es/N0={snr:g} dB: 16PSK {psk:.3e}，16APSK {apsk:.3e}",
        "csa_running": "在 PSNR {psnr} 下比较 CSA 与非 CSA，共 {seeds} 个种子",
        "csa_mean": "平均 Top-1: CSA {csa:.2f}%，非 CSA {non_csa:.2f}%",
        "probe_kind": "{kind}: E|H|^2={power:.4f}，K 估计值={k_estimate:.3f}",
        "link_budget": "{link}: 距离 {distance_km:.1f} km，损耗 {loss_db:.2f} dB，接收信噪比 {snr_db:.2f} dB",
        "confusion_accuracy": "{point} 处 Top-1 为 {accuracy:.2f}%",
    },
}


def get_language() -> str:
    """Current language from LANGUAGE, English by default"""
    lang = os.getenv("LANGUAGE", "en_US").strip()
    if lang not in _TRANSLATIONS:
        return "en_US"
    return lang


def t(key: str, **kwargs) -> str:
    """
    Look up a user-facing message

    Args:
        key: translation key
        **kwargs: values for the message placeholders
    Returns:
        the formatted message, or the key itself when it is unknown
    """
    lang = get_language()
    translation = _TRANSLATIONS.get(lang, _TRANSLATIONS["en_US"]).get(key, key)

    if kwargs:
        try:
            return translation.format(**kwargs)
        except (KeyError, ValueError):
            # Fall back to the raw template when formatting fails
            return translation

    return translation


__all__ = ('t', 'get_language')
