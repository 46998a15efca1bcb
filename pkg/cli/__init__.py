"""ENTROLAB 命令行入口（entrolab 控制台脚本）"""
