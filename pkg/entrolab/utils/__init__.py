"""工具模块：序列化、报告输出、并行、示意图"""
