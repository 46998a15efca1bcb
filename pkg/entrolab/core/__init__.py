"""核心数学模块"""
